#pragma once

#include <Eigen/Dense>

#include "qgm/core.hpp"

namespace qgm {

/// Network risk summary at one quantile index. delta(a,b) is the change in
/// b's conditional VaR when a moves from its median to its tau-quantile
/// state, given the rest of the network.
struct CovarNetwork {
    double tau = 0.0;
    Eigen::MatrixXd delta;     // d x d, zero diagonal
    Eigen::VectorXd to_deg;    // row sums
    Eigen::VectorXd from_deg;  // column sums
    Eigen::VectorXd net;       // to - from
    double total = 0.0;        // sum of to-degrees
};

/// Empirical tau-quantile (order statistic at ceil(n*tau), 1-indexed).
double var_tau(const Eigen::VectorXd& x, double tau);

/// coefs(a, b) must hold the slope on variable a in the quantile regression
/// of variable b (zero where unselected; zero diagonal).
CovarNetwork delta_covar(const Eigen::MatrixXd& coefs, const SampleMatrix& sample,
                         double tau);

}  // namespace qgm
