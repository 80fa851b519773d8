#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "qgm/core.hpp"
#include "qgm/design.hpp"
#include "qgm/graph.hpp"
#include "qgm/lasso.hpp"
#include "qgm/penalty.hpp"
#include "qgm/solver.hpp"

namespace qgm {

/// Conditional density of the target at its conditional quantile, one value
/// per row, from quantile fits at tau +- h.
struct DensityEstimate {
    Eigen::VectorXd f_hat;
    double h = 0.0;
    int clipped_count = 0;
};

/// Step-1 output for one (node, tau, event): penalized fit, thresholded
/// support and its refit. loadings align with the node design columns
/// (intercept loading zero).
struct NodeFit {
    QrFit penalized;
    QrFit post;
    std::vector<int> support;  // node-design column positions (intercept excluded)
    Eigen::VectorXd loadings;
    double lambda_u = 0.0;  // penalty level actually applied (per-observation scale)
};

/// Orthogonal-score estimate for one (node, target column, tau, event).
struct ScoreEstimate {
    int node = 0;
    int col = 0;     // position within the node design
    int source = 0;  // originating variable
    int tau_idx = 0;
    int event_idx = 0;
    double beta_check = 0.0;
    double se = 0.0;      // plug-in sd of the asymptotic law of sqrt(n) beta_check
    double t_stat = 0.0;  // sqrt(n) |beta_check| / se
    Eigen::VectorXd v_tilde;
    double alpha_lo = 0.0;
    double alpha_hi = 0.0;
    std::vector<std::pair<double, double>> L_curve;  // grid evaluations
};

NodeFit fit_node(const Eigen::VectorXd& y, const Eigen::MatrixXd& Z,
                 const EventWeights& ev, double tau, double lambda_vt,
                 const QgmConfig& config);

DensityEstimate estimate_density(const Eigen::VectorXd& y, const Eigen::MatrixXd& Z,
                                 const EventWeights& ev, double tau,
                                 double lambda_vt, const QgmConfig& config);

ScoreEstimate orthogonal_score(const Eigen::VectorXd& y, const Eigen::MatrixXd& Z,
                               const EventWeights& ev, double tau, int j_pos,
                               const QrFit& post_fit, const Eigen::VectorXd& v_tilde,
                               const QgmConfig& config);

/// One hypothesis group (a,b) at a (tau, event): the scores of all columns
/// of node a that derive from variable b.
struct CvGroup {
    int from = 0;
    int to = 0;
    int tau_idx = 0;
    int event_idx = 0;
    std::vector<int> score_ids;
    double observed = 0.0;  // max |t| over members
};

struct CvResult {
    double cv = 0.0;                  // final critical value
    std::vector<double> cv_sequence;  // one entry per stepdown round
    std::vector<char> rejected;       // per group
};

/// Gaussian multiplier bootstrap over the standardized scores psi (one
/// n-vector per ScoreEstimate); multipliers are shared within a draw. With
/// stepdown, rounds drop rejected groups and shrink the critical value to a
/// fixed point.
CvResult bootstrap_cv(const std::vector<Eigen::VectorXd>& psi,
                      const std::vector<CvGroup>& groups, int n, double level,
                      int B, std::uint64_t master_seed, bool stepdown,
                      int threads = 1);

/// Single-step edge rule: (a,b) present iff the group's observed max |t|
/// exceeds cv.
void build_ci_graph(const std::vector<CvGroup>& groups, double cv,
                    GraphEstimate& graph);

enum class CiMode {
    SupportGraph,   // step-1 thresholded-support graph (simulation protocol)
    FullInference,  // steps 1-3 + multiplier bootstrap critical values
};

struct CiResult {
    GraphEstimate graph;
    PenaltyChoice lambda;
    std::vector<ScoreEstimate> scores;  // FullInference only
    std::vector<CvGroup> groups;        // FullInference only
    CvResult cv;                        // FullInference only
    int clipped_density_rows = 0;
    std::vector<std::string> warnings;
    std::vector<int> failed_nodes;
};

CiResult run_ciqgm(const SampleMatrix& sample, const QgmConfig& config, CiMode mode);

}  // namespace qgm
