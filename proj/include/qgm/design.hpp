#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qgm/core.hpp"

namespace qgm {

/// Provenance of one design column: which variable it derives from (-1 for
/// the intercept) and how.
struct ColumnInfo {
    int source = -1;
    std::string transform = "const";  // const | id | square | abs
};

/// Shared column universe plus per-node column selections. Node a's design
/// Z^a is universe(:, node_cols[a]); column 0 of the universe is the
/// intercept and leads every node design.
struct DesignSet {
    Eigen::MatrixXd universe;
    std::vector<ColumnInfo> info;
    std::vector<std::vector<int>> node_cols;

    int n_nodes() const { return static_cast<int>(node_cols.size()); }

    Eigen::MatrixXd node_matrix(int a) const {
        Eigen::MatrixXd Z(universe.rows(), node_cols[a].size());
        for (std::size_t j = 0; j < node_cols[a].size(); ++j)
            Z.col(j) = universe.col(node_cols[a][j]);
        return Z;
    }

    /// Positions within node a's design whose source variable is b.
    std::vector<int> group(int a, int b) const {
        std::vector<int> out;
        for (std::size_t j = 0; j < node_cols[a].size(); ++j)
            if (info[node_cols[a][j]].source == b) out.push_back(static_cast<int>(j));
        return out;
    }
};

/// Conditional-independence designs: Z^a = intercept + transformations of the
/// other variables (identity always; optional square / abs expansions).
DesignSet build_ci_designs(const SampleMatrix& sample,
                           const std::vector<std::string>& expansions);

/// Predictive designs: X_{-a} = intercept + the raw other variables.
inline DesignSet build_pred_designs(const SampleMatrix& sample) {
    return build_ci_designs(sample, {});
}

}  // namespace qgm
