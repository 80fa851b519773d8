#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qgm/core.hpp"
#include "qgm/design.hpp"
#include "qgm/graph.hpp"
#include "qgm/penalty.hpp"
#include "qgm/solver.hpp"

namespace qgm {

/// Predictive-pipeline output for one (node, tau, event): pilot penalized
/// fit at lambda0, its thresholded refit, the residual signs it generates,
/// the final penalized fit at the bootstrap penalty, and the final refit on
/// the selected columns (node-design positions, intercept excluded).
struct PqgmNodeFit {
    QrFit pilot;
    QrFit pilot_refit;
    Eigen::VectorXd eps_hat;  // entries in {-tau, 1-tau}
    QrFit final_fit;
    QrFit final_refit;
    std::vector<int> selected;
    Eigen::VectorXd pilot_loadings;
    Eigen::VectorXd final_loadings;
    std::vector<int> dropped_cols;  // zero final loading, excluded and recorded
};

/// Pilot stage only (lambda_bar is computed jointly afterwards).
PqgmNodeFit fit_pqgm_pilot(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                           const EventWeights& ev, double tau, double lambda0,
                           const QgmConfig& config);

/// Completes a pilot fit with the shared bootstrap penalty.
void fit_pqgm_final(PqgmNodeFit& fit, const Eigen::VectorXd& y,
                    const Eigen::MatrixXd& X, const EventWeights& ev, double tau,
                    double lambda_bar, const QgmConfig& config);

/// Single-node convenience wrapper (pilot + final with a supplied
/// lambda_bar); the full pipeline computes one lambda_bar across all units.
PqgmNodeFit fit_pqgm_node(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                          const EventWeights& ev, double tau, double lambda0,
                          double lambda_bar, const QgmConfig& config);

struct PqgmResult {
    GraphEstimate graph;
    PenaltyChoice lambda0;
    PenaltyChoice lambda_bar;
    std::vector<PqgmNodeFit> fits;          // (event * T + tau) * d + node
    std::vector<Eigen::MatrixXd> coefs;     // per layer: (a,b) = slope on a in b's refit
    std::vector<std::string> warnings;
    std::vector<int> failed_nodes;

    const PqgmNodeFit& fit(int event_idx, int tau_idx, int node, int T, int d) const {
        return fits[(event_idx * T + tau_idx) * d + node];
    }
};

PqgmResult run_pqgm(const SampleMatrix& sample, const QgmConfig& config);

}  // namespace qgm
