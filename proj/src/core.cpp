#include "qgm/core.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace qgm {

void SampleMatrix::validate() const {
    if (values.rows() < 2) throw Error("sample needs n >= 2 rows");
    if (values.cols() < 2) throw Error("sample needs d >= 2 columns");
    if (static_cast<int>(names.size()) != d())
        throw DimensionMismatch("column name count does not match d");
    if (!values.allFinite()) throw Error("sample contains NaN/Inf entries");
    std::unordered_set<std::string> seen;
    for (const auto& nm : names)
        if (!seen.insert(nm).second) throw Error("duplicate column name: " + nm);
    if (w) {
        if (w->size() != values.rows())
            throw DimensionMismatch("conditioning column length does not match n");
        if (!w->allFinite()) throw Error("conditioning column contains NaN/Inf");
    }
}

void TauGrid::validate() const {
    if (taus.empty()) throw Error("tau grid is empty");
    for (std::size_t i = 0; i < taus.size(); ++i) {
        if (!(taus[i] > 0.0 && taus[i] < 1.0))
            throw Error("tau outside (0,1)");
        if (i > 0 && !(taus[i] > taus[i - 1]))
            throw Error("tau grid must be strictly increasing");
    }
}

EventSpec EventSpec::trivial(std::string label) {
    EventSpec s;
    s.kind = Kind::Trivial;
    s.label = std::move(label);
    return s;
}

EventSpec EventSpec::lower_tail(double threshold, std::string label) {
    EventSpec s;
    s.kind = Kind::LowerTail;
    s.hi = threshold;
    s.label = std::move(label);
    return s;
}

EventSpec EventSpec::interval(double lo, double hi, std::string label) {
    EventSpec s;
    s.kind = Kind::Interval;
    s.lo = lo;
    s.hi = hi;
    s.label = std::move(label);
    return s;
}

void QgmConfig::validate() const {
    if (!(c_slack > 1.0)) throw ConfigError("c_slack must exceed 1");
    if (gamma_level != 0.0 && !(gamma_level > 0.0 && gamma_level < 1.0))
        throw ConfigError("gamma_level must lie in (0,1)");
    if (B_penalty < 100) throw ConfigError("B_penalty must be >= 100");
    if (B_boot < 100) throw ConfigError("B_boot must be >= 100");
    if (!(bandwidth_const > 0.0)) throw ConfigError("bandwidth_const must be positive");
    if (!(density_floor > 0.0)) throw ConfigError("density_floor must be positive");
    if (!(kkt_tol > 0.0)) throw ConfigError("kkt_tol must be positive");
    if (alpha_grid_points < 2) throw ConfigError("alpha_grid_points must be >= 2");
    if (d_w < 0) throw ConfigError("d_w must be >= 0");
    tau_grid.validate();
    if (events.empty()) throw ConfigError("at least one event required");
    for (const auto& e : expansions)
        if (e != "square" && e != "abs")
            throw ConfigError("unknown expansion: " + e);
}

double QgmConfig::gamma(int n) const {
    if (gamma_level > 0.0) return gamma_level;
    return 0.1 / std::log(static_cast<double>(std::max(n, 3)));
}

double QgmConfig::resolved_cv_level(int n) const {
    if (cv_level > 0.0) return cv_level;
    return 1.0 - gamma(n);
}

double QgmConfig::bandwidth(int n) const {
    const double h0 = bandwidth_const * std::pow(static_cast<double>(n), -1.0 / 6.0);
    return std::min({h0, tau_grid.tau_min() / 2.0, (1.0 - tau_grid.tau_max()) / 2.0});
}

double check_loss(double t, double tau) {
    return t * (tau - (t <= 0.0 ? 1.0 : 0.0));
}

EventWeights event_weights(const EventSpec& spec, const SampleMatrix& sample,
                           int d_effective) {
    const int n = sample.n();
    EventWeights out;
    out.k = Eigen::VectorXd::Ones(n);
    if (spec.kind == EventSpec::Kind::Trivial) {
        out.m = n;
        return out;
    }
    if (!sample.w)
        throw MissingConditioningColumn("event '" + spec.label +
                                        "' needs a conditioning column");
    const Eigen::VectorXd& w = *sample.w;
    int m = 0;
    for (int i = 0; i < n; ++i) {
        bool in = spec.kind == EventSpec::Kind::LowerTail
                      ? (w[i] <= spec.hi)
                      : (w[i] >= spec.lo && w[i] <= spec.hi);
        out.k[i] = in ? 1.0 : 0.0;
        m += in ? 1 : 0;
    }
    out.m = m;
    if (m < d_effective + 2)
        throw EventTooSmall("event '" + spec.label + "' selects " + std::to_string(m) +
                            " rows; need at least " + std::to_string(d_effective + 2));
    return out;
}

double weighted_column_scale(const Eigen::VectorXd& column, const Eigen::VectorXd& k) {
    if (column.size() != k.size())
        throw DimensionMismatch("column/weights length mismatch");
    const double n = static_cast<double>(column.size());
    const double s = std::sqrt(column.array().square().matrix().dot(k) / n);
    if (s == 0.0) throw ZeroColumn("column vanishes on the event");
    return s;
}

namespace {

// Closed form of int_0^v (1{w <= z} - 1{w <= 0}) dz; the integrand is a step
// function so the piecewise evaluation is exact.
double knight_integral(double w, double v) {
    if (v >= 0.0) {
        if (w <= 0.0) return 0.0;
        return v > w ? v - w : 0.0;
    }
    // v < 0: integral = -int_v^0; integrand vanishes there unless w lands in [v,0)
    if (w > 0.0) return 0.0;
    return w > v ? w - v : 0.0;
}

}  // namespace

double knight_gap(double w, double v, double tau) {
    const double lhs = check_loss(w - v, tau) - check_loss(w, tau);
    const double rhs = -v * (tau - (w <= 0.0 ? 1.0 : 0.0)) + knight_integral(w, v);
    return std::abs(lhs - rhs);
}

}  // namespace qgm
