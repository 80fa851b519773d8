#include "qgm/pqgm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "qgm/parallel.hpp"

namespace qgm {

namespace {

Eigen::VectorXd slope_loadings(const Eigen::MatrixXd& X, const Eigen::VectorXd& k,
                               const Eigen::VectorXd* eps, std::vector<int>* dropped) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    for (int j = 1; j < p; ++j) {
        Eigen::VectorXd col2 = X.col(j).cwiseAbs2();
        if (eps) col2 = col2.cwiseProduct(eps->cwiseAbs2());
        const double m2 = col2.dot(k) / n;
        if (m2 <= 0.0) {
            if (!dropped)
                throw DegenerateLoading("zero loading for column " + std::to_string(j));
            dropped->push_back(j);
            w[j] = -1.0;  // sentinel: excluded from the fit
        } else {
            w[j] = std::sqrt(m2);
        }
    }
    return w;
}

// Solve with columns carrying sentinel loadings physically removed.
QrFit solve_masked(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& k, double tau, double lambda_per_obs,
                   const Eigen::VectorXd& loadings, const QgmConfig& config) {
    const int n = static_cast<int>(y.size());
    const int p = static_cast<int>(X.cols());
    std::vector<int> cols;
    for (int j = 0; j < p; ++j)
        if (loadings[j] >= 0.0) cols.push_back(j);
    QrProblem pr;
    pr.y = y;
    pr.tau = tau;
    pr.k = k;
    pr.lambda = static_cast<double>(n) * lambda_per_obs;
    pr.X.resize(n, cols.size());
    pr.loadings.resize(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        pr.X.col(j) = X.col(cols[j]);
        pr.loadings[j] = loadings[cols[j]];
    }
    QrFit reduced = qr_solve(pr, config);
    QrFit fit;
    fit.beta = Eigen::VectorXd::Zero(p);
    for (std::size_t j = 0; j < cols.size(); ++j)
        fit.beta[cols[j]] = reduced.beta[j];
    fit.objective = reduced.objective;
    fit.residuals = reduced.residuals;
    fit.kkt_gap = reduced.kkt_gap;
    fit.iterations = reduced.iterations;
    for (int j = 0; j < p; ++j)
        if (fit.beta[j] != 0.0) fit.support.push_back(j);
    return fit;
}

}  // namespace

PqgmNodeFit fit_pqgm_pilot(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                           const EventWeights& ev, double tau, double lambda0,
                           const QgmConfig& config) {
    PqgmNodeFit out;
    out.pilot_loadings = slope_loadings(X, ev.k, nullptr, &out.dropped_cols);
    out.pilot = solve_masked(y, X, ev.k, tau, lambda0, out.pilot_loadings, config);
    std::vector<int> sup = threshold_support(out.pilot, lambda0, out.pilot_loadings);

    QrProblem pr;
    pr.y = y;
    pr.X = X;
    pr.tau = tau;
    pr.k = ev.k;
    out.pilot_refit = qr_refit(pr, sup, config);

    const int n = static_cast<int>(y.size());
    out.eps_hat.resize(n);
    const Eigen::VectorXd fitted = X * out.pilot_refit.beta;
    for (int i = 0; i < n; ++i)
        out.eps_hat[i] = (y[i] <= fitted[i] ? 1.0 : 0.0) - tau;
    return out;
}

void fit_pqgm_final(PqgmNodeFit& fit, const Eigen::VectorXd& y,
                    const Eigen::MatrixXd& X, const EventWeights& ev, double tau,
                    double lambda_bar, const QgmConfig& config) {
    fit.final_loadings =
        slope_loadings(X, ev.k, &fit.eps_hat, &fit.dropped_cols);
    fit.final_fit =
        solve_masked(y, X, ev.k, tau, lambda_bar, fit.final_loadings, config);
    fit.selected =
        threshold_support(fit.final_fit, lambda_bar, fit.final_loadings);

    QrProblem pr;
    pr.y = y;
    pr.X = X;
    pr.tau = tau;
    pr.k = ev.k;
    fit.final_refit = qr_refit(pr, fit.selected, config);
    std::sort(fit.dropped_cols.begin(), fit.dropped_cols.end());
    fit.dropped_cols.erase(
        std::unique(fit.dropped_cols.begin(), fit.dropped_cols.end()),
        fit.dropped_cols.end());
}

PqgmNodeFit fit_pqgm_node(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                          const EventWeights& ev, double tau, double lambda0,
                          double lambda_bar, const QgmConfig& config) {
    PqgmNodeFit fit = fit_pqgm_pilot(y, X, ev, tau, lambda0, config);
    fit_pqgm_final(fit, y, X, ev, tau, lambda_bar, config);
    return fit;
}

PqgmResult run_pqgm(const SampleMatrix& sample, const QgmConfig& config) {
    sample.validate();
    config.validate();
    const int n = sample.n();
    const int d = sample.d();
    const double gamma = config.gamma(n);
    DesignSet designs = build_pred_designs(sample);

    PqgmResult res;
    res.graph.d = d;
    res.graph.names = sample.names;
    res.graph.taus = config.tau_grid.taus;

    std::vector<EventWeights> events;
    for (const auto& spec : config.events) {
        events.push_back(event_weights(spec, sample, d));
        res.graph.event_labels.push_back(spec.label);
    }
    const int E = static_cast<int>(events.size());
    const int T = config.tau_grid.size();

    res.lambda0 = analytic_lambda0(n, d, config.d_w, gamma, config.c_slack);

    const int n_units = E * T * d;
    res.fits.resize(n_units);
    std::vector<char> unit_ok(n_units, 0);
    std::vector<std::string> unit_err(n_units);
    std::vector<Eigen::MatrixXd> node_X(d);
    for (int a = 0; a < d; ++a) node_X[a] = designs.node_matrix(a);

    parallel_for(n_units, config.threads, [&](std::size_t u) {
        const int e = static_cast<int>(u) / (T * d);
        const int t = (static_cast<int>(u) / d) % T;
        const int a = static_cast<int>(u) % d;
        try {
            res.fits[u] = fit_pqgm_pilot(sample.values.col(a), node_X[a], events[e],
                                         config.tau_grid.taus[t], res.lambda0.value,
                                         config);
            unit_ok[u] = 1;
        } catch (const std::exception& ex) {
            unit_err[u] = ex.what();
        }
    });

    // One joint bootstrap penalty across all nodes, taus and events.
    std::vector<ResidualSigns> signs;
    for (int u = 0; u < n_units; ++u) {
        if (!unit_ok[u]) continue;
        ResidualSigns s;
        s.node = u % d;
        s.tau_idx = (u / d) % T;
        s.event_idx = u / (T * d);
        s.eps = res.fits[u].eps_hat;
        signs.push_back(std::move(s));
    }
    if (signs.empty()) throw DegenerateDesign("every pilot regression failed");
    // Columns with no mass on an event cannot be regressors there; mask them
    // out of the penalty statistic like the fits drop them.
    Eigen::MatrixXi usable(E, d);
    for (int e = 0; e < E; ++e)
        for (int j = 0; j < d; ++j)
            usable(e, j) =
                sample.values.col(j).cwiseAbs2().dot(events[e].k) > 0.0 ? 1 : 0;
    res.lambda_bar =
        bootstrap_lambda(sample.values, signs, events, 1.0 / n, config.B_penalty,
                         config.master_seed, config.threads, &usable);

    parallel_for(n_units, config.threads, [&](std::size_t u) {
        if (!unit_ok[u]) return;
        const int e = static_cast<int>(u) / (T * d);
        const int t = (static_cast<int>(u) / d) % T;
        const int a = static_cast<int>(u) % d;
        try {
            fit_pqgm_final(res.fits[u], sample.values.col(a), node_X[a], events[e],
                           config.tau_grid.taus[t], res.lambda_bar.value, config);
        } catch (const std::exception& ex) {
            unit_ok[u] = 0;
            unit_err[u] = ex.what();
        }
    });

    std::set<int> failed;
    for (int u = 0; u < n_units; ++u) {
        if (!unit_ok[u]) {
            failed.insert(u % d);
            res.warnings.push_back("node " + sample.names[u % d] + ": " + unit_err[u]);
        } else if (!res.fits[u].dropped_cols.empty()) {
            res.warnings.push_back("node " + sample.names[u % d] + ": dropped " +
                                   std::to_string(res.fits[u].dropped_cols.size()) +
                                   " zero-loading columns");
        }
    }

    res.graph.layers.resize(E * T);
    res.coefs.assign(E * T, Eigen::MatrixXd::Zero(d, d));
    for (int e = 0; e < E; ++e)
        for (int t = 0; t < T; ++t) {
            GraphLayer& layer = res.graph.layer(e, t);
            layer.event_idx = e;
            layer.tau_idx = t;
            layer.adjacency = Eigen::MatrixXi::Zero(d, d);
        }
    for (int u = 0; u < n_units; ++u) {
        if (!unit_ok[u]) continue;
        const int e = u / (T * d);
        const int t = (u / d) % T;
        const int a = u % d;
        GraphLayer& layer = res.graph.layer(e, t);
        const PqgmNodeFit& nf = res.fits[u];
        for (int jp : nf.selected) {
            const int b = designs.info[designs.node_cols[a][jp]].source;
            layer.adjacency(a, b) = 1;
            const double margin =
                std::abs(nf.final_fit.beta[jp]) * nf.final_loadings[jp];
            layer.edges.push_back({a, b, margin, nf.final_refit.beta[jp]});
            res.coefs[e * T + t](b, a) = nf.final_refit.beta[jp];
        }
    }
    for (auto& layer : res.graph.layers) {
        std::sort(layer.edges.begin(), layer.edges.end(),
                  [](const EdgeStat& x, const EdgeStat& y) {
                      return std::tie(x.from, x.to) < std::tie(y.from, y.to);
                  });
    }
    build_unions(res.graph);
    res.failed_nodes.assign(failed.begin(), failed.end());
    res.graph.failed_nodes = res.failed_nodes;
    return res;
}

}  // namespace qgm
