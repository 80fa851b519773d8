#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "qgm/core.hpp"

namespace qgm {

/// One weighted, loading-scaled l1-penalized quantile regression instance.
///
/// Objective convention (QrFit::objective reports exactly this):
///   (1/n) sum_i k_i rho_tau(y_i - x_i'beta) + (lambda/n) sum_j loadings_j |beta_j|
/// A zero loading leaves the coordinate unpenalized (used for the intercept);
/// lambda = 0 gives plain quantile regression. k is a binary row selector
/// (empty means all ones). support_restriction switches to refit mode and
/// requires lambda = 0.
struct QrProblem {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    double tau = 0.5;
    double lambda = 0.0;
    Eigen::VectorXd loadings;  // empty => all zero (unpenalized)
    Eigen::VectorXd k;         // empty => all ones
    std::optional<std::vector<int>> support_restriction;

    int n() const { return static_cast<int>(y.size()); }
    int p() const { return static_cast<int>(X.cols()); }
};

struct QrFit {
    Eigen::VectorXd beta;
    double objective = 0.0;
    Eigen::VectorXd residuals;
    std::vector<int> support;  // indices with beta_j != 0
    double kkt_gap = 0.0;
    int iterations = 0;
};

/// Thrown when the pivot budget runs out; carries the best iterate.
class QrMaxIterations : public MaxIterations {
public:
    QrMaxIterations(const std::string& what, QrFit best_fit)
        : MaxIterations(what), best(std::move(best_fit)) {}
    QrFit best;
};

/// Exact solve of the convex objective above. The returned fit certifies
/// global optimality: kkt_gap is the largest distance from zero to any
/// coordinate's subdifferential interval (residuals within 1e-10 of zero
/// contribute their full [tau-1, tau] subgradient range).
QrFit qr_solve(const QrProblem& problem, const QgmConfig& config);

/// Unpenalized refit restricted to support (the intercept column 0 is always
/// kept). Off-support coefficients are exactly zero. Collinear support
/// columns are pruned earliest-first; pruned indices are reported through
/// *dropped when given.
QrFit qr_refit(const QrProblem& problem, const std::vector<int>& support,
               const QgmConfig& config, std::vector<int>* dropped = nullptr);

/// {j : |beta_j| * loadings_j >= level and beta_j != 0}.
std::vector<int> threshold_support(const QrFit& fit, double level,
                                   const Eigen::VectorXd& loadings);

/// Certificate recomputation from scratch (also used by tests); columns may
/// be restricted to `active_cols` for refit certificates.
double qr_kkt_gap(const QrProblem& problem, const Eigen::VectorXd& beta,
                  const std::vector<int>* active_cols = nullptr);

}  // namespace qgm
