#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "qgm/core.hpp"
#include "qgm/design.hpp"

namespace qgm {

/// A penalty level in the per-observation convention: it scales loading-
/// weighted l1 norms of the form sum_j loading_j |beta_j| against an
/// E_n-normalized loss.
struct PenaltyChoice {
    enum class Method { Analytic, PivotalSim, MultiplierBoot, LassoAnalytic };
    double value = 0.0;
    Method method = Method::Analytic;
    double xi = 0.0;
    int draws = 0;
    std::uint64_t seed = 0;
};

/// Simulated pivotal penalty: per node a and draw b, the sup over the tau
/// grid, events and columns of the self-normalized uniform score
///   |E_n[K (1{U<=tau}-tau) Z_j]| / (sqrt(tau(1-tau)) E_n[K Z_j^2]^{1/2});
/// uniforms are shared across nodes within a draw. Returns the max over
/// nodes of the empirical (1 - xi/|V|)-quantile (order statistic
/// ceil((1-xi/|V|) B), capped at the largest draw).
///
/// level_override > 0 replaces the 1 - xi/|V| rule with an explicit per-node
/// quantile level; the graph-recovery benchmark uses the 1 - alpha level of
/// its experiment protocol through this hook.
PenaltyChoice pivotal_lambda(const DesignSet& designs, const TauGrid& taus,
                             const std::vector<EventWeights>& events, double xi,
                             int B, std::uint64_t master_seed, int threads = 1,
                             double level_override = 0.0);

/// Closed-form conservative pilot level. d_w = 0 selects the unconditional
/// formula with (ne)^2 inside the logarithm; d_w >= 1 uses (ne/d_w)^{2 d_w}.
PenaltyChoice analytic_lambda0(int n, int n_nodes, int d_w, double xi,
                               double c_slack);

/// One pilot residual-sign vector (entries in {-tau, 1-tau}) per estimation
/// unit u = (node, tau index, event index).
struct ResidualSigns {
    int node = 0;
    int tau_idx = 0;
    int event_idx = 0;
    Eigen::VectorXd eps;
};

/// Multiplier-bootstrap penalty (the 1.1 factor is part of the statistic):
/// per draw a fresh standard normal n-vector g shared across all units and
/// columns; statistic 1.1 max_u max_{j != node(u)}
///   |E_n[K g eps X_j]| / E_n[K eps^2 X_j^2]^{1/2};
/// returns the empirical (1-xi)-quantile over B draws. A zero denominator is
/// an error unless the caller masks that (event, column) out via `usable`
/// (events x columns, nonzero = participates) — the pipelines mask columns
/// they dropped for vanishing on an event.
PenaltyChoice bootstrap_lambda(const Eigen::MatrixXd& X,
                               const std::vector<ResidualSigns>& signs,
                               const std::vector<EventWeights>& events,
                               double xi, int B, std::uint64_t master_seed,
                               int threads = 1,
                               const Eigen::MatrixXi* usable = nullptr);

/// Lasso level 1.1 n^{-1/2} 2 Phi^{-1}(1 - xi/N_n).
PenaltyChoice lasso_lambda(int n, double N_n, double xi);

/// Same with N_n given as log(N_n), for counts far beyond double range.
PenaltyChoice lasso_lambda_log(int n, double log_N_n, double xi);

/// Shared empirical-quantile convention: the ceil(level * B) order statistic
/// (1-indexed), clamped to the observed draws.
double empirical_quantile(std::vector<double> draws, double level);

}  // namespace qgm
