#include "qgm/penalty.hpp"

#include <algorithm>
#include <cmath>

#include "qgm/mathx.hpp"
#include "qgm/parallel.hpp"
#include "qgm/rng.hpp"

namespace qgm {

double empirical_quantile(std::vector<double> draws, double level) {
    if (draws.empty()) throw Error("empirical quantile of no draws");
    const int B = static_cast<int>(draws.size());
    int idx = static_cast<int>(std::ceil(level * B));
    idx = std::clamp(idx, 1, B);
    std::nth_element(draws.begin(), draws.begin() + (idx - 1), draws.end());
    return draws[idx - 1];
}

PenaltyChoice pivotal_lambda(const DesignSet& designs, const TauGrid& taus,
                             const std::vector<EventWeights>& events, double xi,
                             int B, std::uint64_t master_seed, int threads,
                             double level_override) {
    if (B < 100) throw Error("pivotal_lambda needs B >= 100");
    if (!(xi > 0.0 && xi < 1.0)) throw Error("xi outside (0,1)");
    const int n = static_cast<int>(designs.universe.rows());
    const int P = static_cast<int>(designs.universe.cols());
    const int V = designs.n_nodes();
    const int T = taus.size();
    const int E = static_cast<int>(events.size());

    // Per-event column loadings E_n[K Z_j^2]^{1/2}; used columns must not
    // vanish on any event.
    Eigen::MatrixXd load(E, P);
    for (int e = 0; e < E; ++e)
        for (int c = 0; c < P; ++c)
            load(e, c) = std::sqrt(
                designs.universe.col(c).array().square().matrix().dot(events[e].k) / n);
    for (int a = 0; a < V; ++a)
        for (int c : designs.node_cols[a])
            for (int e = 0; e < E; ++e)
                if (load(e, c) == 0.0)
                    throw DegenerateDesign("zero penalty loading for a design column");

    Eigen::MatrixXd node_draws(B, V);
    const int block_size = 64;
    const int n_blocks = (B + block_size - 1) / block_size;
    parallel_for(n_blocks, threads, [&](std::size_t blk) {
        Eigen::VectorXd u(n), v(n);
        Eigen::VectorXd col_stat(P);
        for (int b = static_cast<int>(blk) * block_size;
             b < std::min(B, (static_cast<int>(blk) + 1) * block_size); ++b) {
            Rng rng(master_seed,
                    {static_cast<std::uint64_t>(StreamPurpose::PivotalPenalty),
                     static_cast<std::uint64_t>(b)});
            for (int i = 0; i < n; ++i) u[i] = rng.uniform();
            Eigen::VectorXd best = Eigen::VectorXd::Zero(V);
            for (int t = 0; t < T; ++t) {
                const double tau = taus.taus[t];
                const double root = std::sqrt(tau * (1.0 - tau));
                for (int i = 0; i < n; ++i) v[i] = (u[i] <= tau ? 1.0 : 0.0) - tau;
                for (int e = 0; e < E; ++e) {
                    const Eigen::VectorXd kv = v.cwiseProduct(events[e].k);
                    col_stat.noalias() = designs.universe.transpose() * kv / n;
                    for (int a = 0; a < V; ++a) {
                        double m = 0.0;
                        for (int c : designs.node_cols[a]) {
                            const double s =
                                std::abs(col_stat[c]) / (root * load(e, c));
                            if (s > m) m = s;
                        }
                        if (m > best[a]) best[a] = m;
                    }
                }
            }
            node_draws.row(b) = best.transpose();
        }
    });

    const double level = level_override > 0.0 ? level_override : 1.0 - xi / V;
    double value = 0.0;
    for (int a = 0; a < V; ++a) {
        std::vector<double> draws(node_draws.col(a).data(),
                                  node_draws.col(a).data() + B);
        value = std::max(value, empirical_quantile(std::move(draws), level));
    }
    PenaltyChoice out;
    out.value = value;
    out.method = PenaltyChoice::Method::PivotalSim;
    out.xi = xi;
    out.draws = B;
    out.seed = master_seed;
    return out;
}

PenaltyChoice analytic_lambda0(int n, int n_nodes, int d_w, double xi,
                               double c_slack) {
    if (n < 2) throw Error("analytic_lambda0 needs n >= 2");
    if (!(xi > 0.0 && xi < 1.0)) throw Error("xi outside (0,1)");
    if (d_w < 0) throw Error("d_w must be >= 0");
    const double logn = std::log(static_cast<double>(n));
    const double logV = std::log(static_cast<double>(n_nodes));
    // log of 8 |V|^2 {ne}^2 / xi, or 8 |V|^2 {ne/d_w}^{2 d_w} / xi
    double inner = std::log(8.0) + 2.0 * logV - std::log(xi);
    if (d_w == 0) {
        inner += 2.0 * (logn + 1.0);
    } else {
        inner += 2.0 * d_w * (logn + 1.0 - std::log(static_cast<double>(d_w)));
    }
    PenaltyChoice out;
    out.value = c_slack / std::sqrt(static_cast<double>(n)) * 2.0 *
                (1.0 + 1.0 / 16.0) * std::sqrt(2.0 * inner);
    out.method = PenaltyChoice::Method::Analytic;
    out.xi = xi;
    return out;
}

PenaltyChoice bootstrap_lambda(const Eigen::MatrixXd& X,
                               const std::vector<ResidualSigns>& signs,
                               const std::vector<EventWeights>& events,
                               double xi, int B, std::uint64_t master_seed,
                               int threads, const Eigen::MatrixXi* usable) {
    if (B < 100) throw Error("bootstrap_lambda needs B >= 100");
    if (!(xi > 0.0 && xi < 1.0)) throw Error("xi outside (0,1)");
    if (signs.empty()) throw Error("bootstrap_lambda needs residual signs");
    const int n = static_cast<int>(X.rows());
    const int d = static_cast<int>(X.cols());
    const int U = static_cast<int>(signs.size());

    // Denominators E_n[K eps^2 X_j^2]^{1/2} per unit and column j != node.
    Eigen::MatrixXd denom(U, d);
    for (int u = 0; u < U; ++u) {
        const auto& s = signs[u];
        if (s.eps.size() != n) throw DimensionMismatch("eps length mismatch");
        const Eigen::VectorXd ke2 =
            events[s.event_idx].k.cwiseProduct(s.eps.cwiseAbs2());
        for (int j = 0; j < d; ++j) {
            if (j == s.node ||
                (usable && (*usable)(s.event_idx, j) == 0)) {
                denom(u, j) = -1.0;
                continue;
            }
            const double m2 = X.col(j).cwiseAbs2().dot(ke2) / n;
            if (m2 <= 0.0)
                throw DegenerateDesign("zero bootstrap loading for a column");
            denom(u, j) = std::sqrt(m2);
        }
    }

    std::vector<double> draws(B, 0.0);
    const int block_size = 64;
    const int n_blocks = (B + block_size - 1) / block_size;
    parallel_for(n_blocks, threads, [&](std::size_t blk) {
        Eigen::VectorXd g(n), num(d);
        for (int b = static_cast<int>(blk) * block_size;
             b < std::min(B, (static_cast<int>(blk) + 1) * block_size); ++b) {
            Rng rng(master_seed,
                    {static_cast<std::uint64_t>(StreamPurpose::BootstrapPenalty),
                     static_cast<std::uint64_t>(b)});
            for (int i = 0; i < n; ++i) g[i] = rng.normal();
            double best = 0.0;
            for (int u = 0; u < U; ++u) {
                const auto& s = signs[u];
                const Eigen::VectorXd gke =
                    g.cwiseProduct(events[s.event_idx].k).cwiseProduct(s.eps);
                num.noalias() = X.transpose() * gke / n;
                for (int j = 0; j < d; ++j) {
                    if (denom(u, j) < 0.0) continue;
                    const double stat = std::abs(num[j]) / denom(u, j);
                    if (stat > best) best = stat;
                }
            }
            draws[b] = 1.1 * best;
        }
    });

    PenaltyChoice out;
    out.value = empirical_quantile(std::move(draws), 1.0 - xi);
    out.method = PenaltyChoice::Method::MultiplierBoot;
    out.xi = xi;
    out.draws = B;
    out.seed = master_seed;
    return out;
}

PenaltyChoice lasso_lambda(int n, double N_n, double xi) {
    if (N_n < 1.0) throw Error("N_n must be >= 1");
    return lasso_lambda_log(n, std::log(N_n), xi);
}

PenaltyChoice lasso_lambda_log(int n, double log_N_n, double xi) {
    if (!(xi > 0.0)) throw Error("xi must be positive");
    const double log_q = std::log(xi) - log_N_n;
    PenaltyChoice out;
    out.value = 1.1 / std::sqrt(static_cast<double>(n)) * 2.0 *
                normal_quantile_upper_log(log_q);
    out.method = PenaltyChoice::Method::LassoAnalytic;
    out.xi = xi;
    return out;
}

}  // namespace qgm
