#include "qgm/covar.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace qgm {

double var_tau(const Eigen::VectorXd& x, double tau) {
    const int n = static_cast<int>(x.size());
    if (n < 1) throw Error("var_tau of empty vector");
    std::vector<double> v(x.data(), x.data() + n);
    int idx = static_cast<int>(std::ceil(tau * n));
    idx = std::clamp(idx, 1, n);
    std::nth_element(v.begin(), v.begin() + (idx - 1), v.end());
    return v[idx - 1];
}

CovarNetwork delta_covar(const Eigen::MatrixXd& coefs, const SampleMatrix& sample,
                         double tau) {
    const int d = sample.d();
    if (coefs.rows() != d || coefs.cols() != d)
        throw DimensionMismatch("coefficient matrix must be d x d");
    CovarNetwork net;
    net.tau = tau;
    net.delta = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd gap(d);
    for (int a = 0; a < d; ++a) {
        gap[a] = var_tau(sample.values.col(a), tau) -
                 var_tau(sample.values.col(a), 0.5);
    }
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            if (a != b) net.delta(a, b) = coefs(a, b) * gap[a];
    net.to_deg = net.delta.rowwise().sum();
    net.from_deg = net.delta.colwise().sum();
    net.net = net.to_deg - net.from_deg;
    net.total = net.to_deg.sum();
    return net;
}

}  // namespace qgm
