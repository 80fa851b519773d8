#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qgm/errors.hpp"

namespace qgm {

/// n x d observation matrix with named columns and an optional conditioning
/// variable W (one value per row). Immutable after validate().
struct SampleMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> names;
    std::optional<Eigen::VectorXd> w;

    int n() const { return static_cast<int>(values.rows()); }
    int d() const { return static_cast<int>(values.cols()); }

    /// Enforces invariants: finite entries, n >= 2, d >= 2, unique names,
    /// W length n when present. Throws DimensionMismatch / Error.
    void validate() const;
};

/// Strictly increasing quantile indices inside (0,1).
struct TauGrid {
    std::vector<double> taus;

    void validate() const;
    double tau_min() const { return taus.front(); }
    double tau_max() const { return taus.back(); }
    int size() const { return static_cast<int>(taus.size()); }
};

/// Conditioning event: row-selection kernel K(W) in {0,1}.
struct EventSpec {
    enum class Kind { Trivial, LowerTail, Interval };
    Kind kind = Kind::Trivial;
    double lo = 0.0;  // LowerTail: threshold in `hi`; Interval: [lo, hi]
    double hi = 0.0;
    std::string label = "all";

    static EventSpec trivial(std::string label = "all");
    static EventSpec lower_tail(double threshold, std::string label);
    static EventSpec interval(double lo, double hi, std::string label);
};

struct EventWeights {
    Eigen::VectorXd k;  // entries in {0,1}
    int m = 0;          // number of selected rows
};

/// Estimation parameters shared by all pipelines. Fields with value <= 0 fall
/// back to their data-driven defaults (gamma_level = 0.1/log n,
/// cv_level = 1 - gamma_level).
struct QgmConfig {
    double c_slack = 1.1;
    double gamma_level = 0.0;   // 0 => 0.1 / log(n)
    int B_penalty = 1000;
    int B_boot = 500;
    double bandwidth_const = 1.0;
    double density_floor = 1e-4;  // epsilon_f
    double kkt_tol = 1e-6;
    int alpha_grid_points = 401;
    TauGrid tau_grid{{0.2, 0.5, 0.8}};
    std::vector<EventSpec> events{EventSpec::trivial()};
    std::vector<std::string> expansions;  // subset of {"square","abs"}
    int d_w = 0;        // dimension of the conditioning family (0 = unconditional formulas)
    bool stepdown = false;
    double cv_level = 0.0;  // 0 => 1 - gamma_level
    int threads = 0;        // 0 => hardware concurrency
    std::uint64_t master_seed = 20240101ULL;
    int max_qr_iterations = 0;  // 0 => solver default

    void validate() const;
    double gamma(int n) const;
    double resolved_cv_level(int n) const;
    /// Bandwidth rule: h = min(bandwidth_const * n^{-1/6}, tau_min/2, (1-tau_max)/2).
    double bandwidth(int n) const;
};

/// Asymmetric absolute (check) loss: t * (tau - 1{t <= 0}).
double check_loss(double t, double tau);

/// Row weights for a conditioning event. d_effective is the widest design the
/// caller will regress on this event; selection smaller than d_effective + 2
/// is refused (EventTooSmall).
EventWeights event_weights(const EventSpec& spec, const SampleMatrix& sample,
                           int d_effective);

/// Event-weighted root mean square of a column: ((1/n) sum_i k_i x_ij^2)^{1/2}.
/// Throws ZeroColumn when the column vanishes on the event.
double weighted_column_scale(const Eigen::VectorXd& column, const Eigen::VectorXd& k);

/// Residual of Knight's identity at (w, v, tau); exactly zero in real
/// arithmetic, used as a self-test of check_loss.
double knight_gap(double w, double v, double tau);

}  // namespace qgm
