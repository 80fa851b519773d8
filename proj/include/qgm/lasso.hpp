#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qgm/core.hpp"
#include "qgm/penalty.hpp"

namespace qgm {

/// Weighted (post-)Lasso result. Objective convention:
///   (1/n) sum_i k_i (t_i - z_i'gamma)^2 + lambda * sum_k loading_k |gamma_k|
/// with lambda in the per-observation convention of PenaltyChoice. gamma and
/// v_hat come from the least-squares refit on the selected support.
struct LassoFit {
    Eigen::VectorXd gamma;
    std::vector<int> support;
    Eigen::VectorXd v_hat;           // refit residuals (zero on inactive rows)
    Eigen::VectorXd loadings_final;  // loadings used in the final pass
    double objective = 0.0;          // refit objective (penalty term included)
    std::vector<int> dropped;        // columns pruned at refit, if any
};

/// Two-pass weighted post-Lasso: conservative max-based loadings first, then
/// residual-based loadings recomputed from the pass-1 refit. Coordinate
/// descent to the kkt_tol subgradient certificate; refit by least squares on
/// the selected support (rank-deficient refits drop the newest columns).
LassoFit weighted_post_lasso(const Eigen::VectorXd& target,
                             const Eigen::MatrixXd& regressors,
                             const Eigen::VectorXd& k,
                             const PenaltyChoice& lambda,
                             const QgmConfig& config);

/// Single weighted Lasso solve with explicit loadings (exposed for tests).
Eigen::VectorXd lasso_cd(const Eigen::VectorXd& target,
                         const Eigen::MatrixXd& regressors,
                         const Eigen::VectorXd& k, double lambda,
                         const Eigen::VectorXd& loadings, double kkt_tol);

}  // namespace qgm
