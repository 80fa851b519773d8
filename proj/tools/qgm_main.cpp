#include <CLI11.hpp>

#include "qgm/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Quantile graphical models: estimation, inference and simulation"};
    app.set_version_flag("--version", qgm::kVersion);
    app.require_subcommand(1);

    auto add_common = [](CLI::App* cmd, qgm::EstimateOptions& opt) {
        cmd->add_option("data", opt.data_path, "input CSV (header row)")->required();
        cmd->add_option("--config", opt.config_path, "JSON config file");
        cmd->add_option("--out", opt.out_dir, "output directory");
        cmd->add_option("--w", opt.w_column,
                        "CSV column holding the conditioning variable W");
        cmd->add_option("--tau", opt.taus, "quantile grid")->delimiter(',');
        cmd->add_option("--events", opt.events,
                        "conditioning events: trivial | lower:<q1,q2,...>");
        auto* seed = cmd->add_option("--seed", opt.seed, "master seed");
        cmd->callback([seed, &opt]() { opt.seed_set = seed->count() > 0; });
        cmd->add_option("--threads", opt.threads, "worker threads (0 = auto)");
        cmd->add_flag("--dot", opt.dot, "also write DOT graphs");
    };

    qgm::EstimateOptions ci_opt;
    CLI::App* ci = app.add_subcommand(
        "estimate-ci", "conditional-independence quantile graph with inference");
    add_common(ci, ci_opt);

    qgm::EstimateOptions p_opt;
    CLI::App* pe = app.add_subcommand("estimate-p", "predictive quantile graph");
    add_common(pe, p_opt);
    pe->add_flag("--covar", p_opt.covar, "also write the CoVaR network per tau");

    qgm::SimulateOptions sim_opt;
    CLI::App* sim =
        app.add_subcommand("simulate", "Monte Carlo graph-recovery benchmark");
    sim->add_option("--design", sim_opt.design, "hub | nongauss | gauss-ar");
    sim->add_option("--n", sim_opt.n, "sample size");
    sim->add_option("--d", sim_opt.d, "dimension");
    sim->add_option("--reps", sim_opt.reps, "replications");
    sim->add_option("--rho", sim_opt.rho, "AR(1) correlation (gauss-ar)");
    sim->add_option("--config", sim_opt.config_path, "JSON config file");
    sim->add_option("--out", sim_opt.out_dir, "output directory");
    sim->add_option("--tau", sim_opt.taus, "quantile grid")->delimiter(',');
    auto* sim_seed = sim->add_option("--seed", sim_opt.seed, "master seed");
    sim->callback([sim_seed, &sim_opt]() { sim_opt.seed_set = sim_seed->count() > 0; });
    sim->add_option("--threads", sim_opt.threads, "worker threads (0 = auto)");

    CLI11_PARSE(app, argc, argv);

    if (ci->parsed()) return qgm::run_estimate_ci(ci_opt);
    if (pe->parsed()) return qgm::run_estimate_p(p_opt);
    if (sim->parsed()) return qgm::run_simulate(sim_opt);
    return qgm::kExitInput;
}
