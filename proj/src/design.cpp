#include "qgm/design.hpp"

#include <algorithm>

namespace qgm {

DesignSet build_ci_designs(const SampleMatrix& sample,
                           const std::vector<std::string>& expansions) {
    const int n = sample.n();
    const int d = sample.d();
    const bool with_square =
        std::find(expansions.begin(), expansions.end(), "square") != expansions.end();
    const bool with_abs =
        std::find(expansions.begin(), expansions.end(), "abs") != expansions.end();
    const int per_var = 1 + (with_square ? 1 : 0) + (with_abs ? 1 : 0);

    DesignSet ds;
    ds.universe.resize(n, 1 + per_var * d);
    ds.universe.col(0) = Eigen::VectorXd::Ones(n);
    ds.info.push_back({-1, "const"});
    for (int v = 0; v < d; ++v) {
        ds.universe.col(ds.info.size()) = sample.values.col(v);
        ds.info.push_back({v, "id"});
        if (with_square) {
            ds.universe.col(ds.info.size()) = sample.values.col(v).array().square();
            ds.info.push_back({v, "square"});
        }
        if (with_abs) {
            ds.universe.col(ds.info.size()) = sample.values.col(v).array().abs();
            ds.info.push_back({v, "abs"});
        }
    }
    ds.node_cols.resize(d);
    for (int a = 0; a < d; ++a) {
        ds.node_cols[a].push_back(0);
        for (std::size_t c = 1; c < ds.info.size(); ++c)
            if (ds.info[c].source != a) ds.node_cols[a].push_back(static_cast<int>(c));
    }
    return ds;
}

}  // namespace qgm
