#include "qgm/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "qgm/ciqgm.hpp"
#include "qgm/covar.hpp"
#include "qgm/io.hpp"
#include "qgm/pqgm.hpp"
#include "qgm/rng.hpp"
#include "qgm/simgen.hpp"

namespace qgm {

using nlohmann::json;

namespace {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose,
                          std::uint64_t idx) {
    return mix64(mix64(mix64(master) ^ purpose) ^ idx);
}

QgmConfigJson load_config(const std::string& config_path) {
    if (config_path.empty()) return QgmConfigJson{};
    return parse_config_json(read_text_file(config_path));
}

void apply_event_flags(QgmConfigJson& cj, const std::vector<std::string>& events) {
    if (events.empty()) return;
    cj.config.events.clear();
    cj.lower_q_events.clear();
    for (const auto& flag : events) {
        if (flag == "trivial") {
            cj.config.events.push_back(EventSpec::trivial());
        } else if (flag.rfind("lower:", 0) == 0) {
            std::istringstream qs(flag.substr(6));
            std::string item;
            while (std::getline(qs, item, ',')) {
                const double q = std::stod(item);
                cj.lower_q_events.emplace_back(
                    static_cast<int>(cj.config.events.size()), q);
                cj.config.events.push_back(EventSpec::lower_tail(
                    0.0, "lower(q=" + format_double(q) + ")"));
            }
        } else {
            throw ConfigError("unknown --events entry: " + flag);
        }
    }
}

void apply_overrides(QgmConfigJson& cj, const EstimateOptions& opt) {
    if (!opt.w_column.empty()) cj.w_column = opt.w_column;
    if (!opt.taus.empty()) cj.config.tau_grid.taus = opt.taus;
    apply_event_flags(cj, opt.events);
    if (opt.seed_set) cj.config.master_seed = opt.seed;
    if (opt.threads >= 0) cj.config.threads = opt.threads;
}

std::string make_meta(const std::string& command, std::uint64_t seed,
                      const std::string& input_digest, int n, int d) {
    json meta;
    meta["command"] = command;
    meta["version"] = kVersion;
    meta["seed"] = seed;
    meta["input_digest"] = input_digest;
    meta["n"] = n;
    meta["d"] = d;
    return meta.dump();
}

void write_manifest(const std::string& path, const std::string& command,
                    const QgmConfig& config, const std::string& w_column,
                    const std::string& input_digest, double wall_seconds,
                    const std::vector<std::string>& warnings,
                    const std::vector<std::string>& outputs) {
    json doc;
    doc["command"] = command;
    doc["version"] = kVersion;
    doc["master_seed"] = config.master_seed;
    doc["config"] = json::parse(config_to_json(config, w_column));
    doc["input_digest"] = input_digest;
    doc["wall_time_s"] = wall_seconds;
    doc["warnings"] = warnings;
    doc["outputs"] = outputs;
    write_text_file(path, doc.dump(2) + "\n");
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

int estimate_common(const EstimateOptions& opt, bool predictive) {
    Timer timer;
    const std::string command = predictive ? "estimate-p" : "estimate-ci";
    std::filesystem::create_directories(opt.out_dir);
    const auto path = [&](const std::string& f) { return opt.out_dir + "/" + f; };

    QgmConfigJson cj;
    SampleMatrix sample;
    std::string input_digest;
    try {
        cj = load_config(opt.config_path);
        apply_overrides(cj, opt);
        const std::string bytes = read_text_file(opt.data_path);
        input_digest = content_digest(bytes);
        sample = parse_csv(bytes, cj.w_column, opt.data_path);
        resolve_quantile_events(cj, sample);
        cj.config.validate();
    } catch (const std::exception& ex) {
        fprintf(stderr, "%s: input error: %s\n", command.c_str(), ex.what());
        return kExitInput;
    }

    const std::string meta =
        make_meta(command, cj.config.master_seed, input_digest, sample.n(), sample.d());
    std::vector<std::string> warnings;
    std::vector<std::string> outputs;
    GraphEstimate graph;
    std::vector<Eigen::MatrixXd> layer_coefs;
    bool partial = false;
    try {
        if (predictive) {
            PqgmResult res = run_pqgm(sample, cj.config);
            warnings = res.warnings;
            partial = !res.failed_nodes.empty();
            graph = std::move(res.graph);
            layer_coefs = std::move(res.coefs);
        } else {
            CiResult res = run_ciqgm(sample, cj.config, CiMode::FullInference);
            warnings = res.warnings;
            if (res.clipped_density_rows > 0)
                warnings.push_back("clipped density rows: " +
                                   std::to_string(res.clipped_density_rows));
            partial = !res.failed_nodes.empty();
            graph = std::move(res.graph);
        }
    } catch (const std::exception& ex) {
        fprintf(stderr, "%s: %s\n", command.c_str(), ex.what());
        return kExitInput;
    }

    write_text_file(path("graph.json"), graph_to_json(graph, meta));
    outputs.push_back("graph.json");
    write_text_file(path("edges.csv"), edges_to_csv(graph));
    outputs.push_back("edges.csv");
    if (opt.dot) {
        for (std::size_t e = 0; e < graph.unions.size(); ++e) {
            const std::string f = "graph_" + graph.event_labels[e] + ".dot";
            write_text_file(path(f),
                            graph_to_dot(graph.unions[e], graph,
                                         command + " " + graph.event_labels[e]));
            outputs.push_back(f);
        }
    }
    if (predictive && opt.covar) {
        // Networks per tau on the first event's layers.
        std::vector<CovarNetwork> nets;
        const int T = static_cast<int>(graph.taus.size());
        for (int t = 0; t < T; ++t)
            nets.push_back(delta_covar(layer_coefs[t], sample, graph.taus[t]));
        write_text_file(path("covar.csv"), covar_to_csv(nets, graph.names));
        outputs.push_back("covar.csv");
        write_text_file(path("covar.json"), covar_to_json(nets, graph.names));
        outputs.push_back("covar.json");
    }
    write_manifest(path("manifest.json"), command, cj.config, cj.w_column,
                   input_digest, timer.seconds(), warnings, outputs);
    return partial ? kExitPartial : kExitOk;
}

double sample_sd(const std::vector<int>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (int x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (v.size() - 1));
}

}  // namespace

int run_estimate_ci(const EstimateOptions& opt) { return estimate_common(opt, false); }

int run_estimate_p(const EstimateOptions& opt) { return estimate_common(opt, true); }

int run_simulate(const SimulateOptions& opt, SimSummary* summary_out) {
    Timer timer;
    std::filesystem::create_directories(opt.out_dir);
    const auto path = [&](const std::string& f) { return opt.out_dir + "/" + f; };

    QgmConfigJson cj;
    try {
        cj = load_config(opt.config_path);
        if (!opt.taus.empty()) cj.config.tau_grid.taus = opt.taus;
        if (opt.seed_set) cj.config.master_seed = opt.seed;
        if (opt.threads >= 0) cj.config.threads = opt.threads;
        cj.config.events = {EventSpec::trivial()};
        if (opt.design == "nongauss") cj.config.expansions = {"square", "abs"};
        cj.config.validate();
        if (opt.reps < 1) throw ConfigError("reps must be >= 1");
        if (opt.design != "hub" && opt.design != "nongauss" &&
            opt.design != "gauss-ar")
            throw ConfigError("unknown design: " + opt.design);
    } catch (const std::exception& ex) {
        fprintf(stderr, "simulate: input error: %s\n", ex.what());
        return kExitInput;
    }

    const bool nongauss = opt.design == "nongauss";
    TrueGraph truth;
    Eigen::MatrixXd sigma;
    try {
        if (opt.design == "hub") {
            truth = gen_hub_graph(opt.d);
            sigma = make_precision(truth).sigma;
        } else if (opt.design == "gauss-ar") {
            std::vector<std::pair<int, int>> edges;
            if (opt.rho != 0.0)
                for (int i = 0; i + 1 < opt.d; ++i) edges.emplace_back(i, i + 1);
            truth = TrueGraph::from_edges(opt.d, std::move(edges));
            sigma.resize(opt.d, opt.d);
            for (int i = 0; i < opt.d; ++i)
                for (int j = 0; j < opt.d; ++j)
                    sigma(i, j) = std::pow(opt.rho, std::abs(i - j));
            if (opt.rho == 0.0) sigma = Eigen::MatrixXd::Identity(opt.d, opt.d);
        }
    } catch (const std::exception& ex) {
        fprintf(stderr, "simulate: input error: %s\n", ex.what());
        return kExitInput;
    }

    SimSummary summary;
    std::vector<std::string> warnings;
    bool partial = false;
    for (int rep = 0; rep < opt.reps; ++rep) {
        const std::uint64_t rep_seed = derive_seed(
            cj.config.master_seed,
            static_cast<std::uint64_t>(StreamPurpose::SimReplication), rep);
        SampleMatrix sample;
        TrueGraph rep_truth = truth;
        if (nongauss) {
            auto [s, t] = gen_nongaussian_iso(opt.n, opt.d, rep_seed);
            sample = std::move(s);
            rep_truth = std::move(t);
        } else {
            sample = sample_mvn(sigma, opt.n, rep_seed);
        }
        QgmConfig rep_config = cj.config;
        rep_config.master_seed = rep_seed;
        try {
            CiResult res = run_ciqgm(sample, rep_config, CiMode::SupportGraph);
            if (!res.failed_nodes.empty()) partial = true;
            for (const auto& w : res.warnings)
                warnings.push_back("rep " + std::to_string(rep) + ": " + w);
            const Eigen::MatrixXi est = res.graph.unions[0].adjacency;
            FpFn score = fp_fn(est, rep_truth, true);
            summary.fp.push_back(score.fp);
            summary.fn.push_back(score.fn);
            if (nongauss) {
                const int a = opt.d - 2, b = opt.d - 1;
                summary.detected.push_back(est(a, b) != 0 || est(b, a) != 0 ? 1 : 0);
            }
        } catch (const std::exception& ex) {
            warnings.push_back("rep " + std::to_string(rep) + " failed: " +
                               std::string(ex.what()));
            partial = true;
        }
    }
    if (summary.fp.empty()) {
        fprintf(stderr, "simulate: every replication failed\n");
        return kExitInput;
    }

    const double reps_done = static_cast<double>(summary.fp.size());
    for (int x : summary.fp) summary.fp_mean += x;
    for (int x : summary.fn) summary.fn_mean += x;
    summary.fp_mean /= reps_done;
    summary.fn_mean /= reps_done;
    summary.fp_sd = sample_sd(summary.fp, summary.fp_mean);
    summary.fn_sd = sample_sd(summary.fn, summary.fn_mean);
    if (nongauss && !summary.detected.empty()) {
        for (int x : summary.detected) summary.detect_rate += x;
        summary.detect_rate /= static_cast<double>(summary.detected.size());
    }

    std::ostringstream table;
    table << (nongauss ? "rep,fp,fn,detected\n" : "rep,fp,fn\n");
    for (std::size_t r = 0; r < summary.fp.size(); ++r) {
        table << r << ',' << summary.fp[r] << ',' << summary.fn[r];
        if (nongauss) table << ',' << summary.detected[r];
        table << '\n';
    }
    write_text_file(path("table.csv"), table.str());

    std::ostringstream sm;
    sm << (nongauss ? "stat,fp,fn,detect_rate\n" : "stat,fp,fn\n");
    sm << "mean," << format_double(summary.fp_mean) << ','
       << format_double(summary.fn_mean);
    if (nongauss) sm << ',' << format_double(summary.detect_rate);
    sm << "\nsd," << format_double(summary.fp_sd) << ','
       << format_double(summary.fn_sd);
    if (nongauss) sm << ",0";
    sm << '\n';
    write_text_file(path("summary.csv"), sm.str());

    std::ostringstream design_desc;
    design_desc << opt.design << ":n=" << opt.n << ",d=" << opt.d
                << ",reps=" << opt.reps;
    if (opt.design == "gauss-ar") design_desc << ",rho=" << format_double(opt.rho);
    write_manifest(path("manifest.json"), "simulate", cj.config, "",
                   content_digest(design_desc.str()), timer.seconds(), warnings,
                   {"table.csv", "summary.csv"});
    if (summary_out) *summary_out = summary;
    return partial ? kExitPartial : kExitOk;
}

}  // namespace qgm
