#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "qgm/core.hpp"

namespace qgm {

/// Undirected ground-truth graph for simulation scoring.
struct TrueGraph {
    int d = 0;
    std::vector<std::pair<int, int>> edges;  // a < b
    Eigen::MatrixXi adjacency;               // symmetric 0/1, zero diagonal

    static TrueGraph from_edges(int d, std::vector<std::pair<int, int>> edges);
    int edge_count() const { return static_cast<int>(edges.size()); }
};

/// Hub graph: d nodes split into groups of 10 (d < 20) or 20, one hub per
/// group connected to every other member. Throws IndivisibleD otherwise.
TrueGraph gen_hub_graph(int d);

/// Theta = D [A + (|lambda_min(A)| + 0.2) I] D with 0.3 on graph edges and
/// D = diag(1,...,1, 1.5,...,1.5) (first ceil(d/2) ones). Returns Theta and
/// Sigma = Theta^{-1}.
struct PrecisionPair {
    Eigen::MatrixXd theta;
    Eigen::MatrixXd sigma;
};
PrecisionPair make_precision(const TrueGraph& graph);

/// Rows i.i.d. N(0, Sigma) via the lower Cholesky factor and inverse-CDF
/// normals from the replication-keyed stream.
SampleMatrix sample_mvn(const Eigen::MatrixXd& sigma, int n, std::uint64_t seed);

/// Location-scale-shift counterexample: X = (W_1..W_{d-1}, Y) with
/// Y = -sqrt(2/(3pi-2)) + sqrt(pi/(3pi-2)) W_{d-1}^2 |W_d|, W ~ N(0, I_d).
/// The only dependent pair is (d-2, d-1) in zero-based indexing.
std::pair<SampleMatrix, TrueGraph> gen_nongaussian_iso(int n, int d,
                                                       std::uint64_t seed);

/// Population conditional-quantile coefficients of node a for Gaussian data:
/// intercept Phi^{-1}(tau)/sqrt(Theta_aa), slope_j = -Theta_aj / Theta_aa.
struct OracleCoefs {
    double intercept = 0.0;
    Eigen::VectorXd slopes;  // indexed by the other variables, in order
};
OracleCoefs gaussian_oracle_coefs(const Eigen::MatrixXd& sigma, int a, double tau);

/// Directed false positives / negatives against a doubled undirected truth.
struct FpFn {
    int fp = 0;
    int fn = 0;
};
FpFn fp_fn(const Eigen::MatrixXi& estimated_directed, const TrueGraph& truth,
           bool directed_count = true);

/// Number of unordered pairs covered by the directed false positives.
int undirected_fp_collapse(const Eigen::MatrixXi& estimated_directed,
                           const TrueGraph& truth);

}  // namespace qgm
