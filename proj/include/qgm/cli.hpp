#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qgm/core.hpp"

namespace qgm {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 ok, 2 input error, 3 partial node failures (outputs written).
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitPartial = 3;

struct EstimateOptions {
    std::string data_path;
    std::string config_path;  // optional
    std::string out_dir = ".";
    bool dot = false;
    bool covar = false;  // estimate-p only
    // overrides (applied on top of the config file when set)
    std::string w_column;
    std::vector<double> taus;
    std::vector<std::string> events;  // "trivial" or "lower:q1,q2,..."
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = -1;  // -1: leave config value
};

struct SimulateOptions {
    std::string design = "hub";  // hub | nongauss | gauss-ar
    int n = 400;
    int d = 40;
    int reps = 20;
    double rho = 0.5;  // gauss-ar only
    std::string config_path;
    std::string out_dir = ".";
    std::vector<double> taus;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = -1;
};

struct SimSummary {
    double fp_mean = 0.0, fp_sd = 0.0;
    double fn_mean = 0.0, fn_sd = 0.0;
    std::vector<int> fp, fn;             // per rep
    std::vector<int> detected;           // nongauss: truth pair found (either direction)
    double detect_rate = 0.0;
};

int run_estimate_ci(const EstimateOptions& opt);
int run_estimate_p(const EstimateOptions& opt);
int run_simulate(const SimulateOptions& opt, SimSummary* summary_out = nullptr);

}  // namespace qgm
