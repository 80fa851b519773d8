#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qgm/core.hpp"
#include "qgm/graph.hpp"
#include "qgm/covar.hpp"

namespace qgm {

/// CSV with a header row, comma separators, decimal-point reals, no missing
/// values. w_column (when nonempty) is pulled out of the matrix into
/// SampleMatrix::w. Parse failures throw CsvError with row/column positions.
SampleMatrix read_csv(const std::string& path, const std::string& w_column);
SampleMatrix parse_csv(const std::string& text, const std::string& w_column,
                       const std::string& origin = "<memory>");

/// Shortest round-trip decimal representation; identical doubles give
/// identical bytes, which the reproducibility checks rely on.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// FNV-1a 64-bit content digest, hex-encoded (provenance, not crypto).
std::string content_digest(const std::string& bytes);

/// Graph serialization per the fixed schema:
/// {meta, taus, events, graphs:[{tau,event,edges:[{from,to,stat,coef}]}], unions:[...]}
std::string graph_to_json(const GraphEstimate& graph, const std::string& meta_json);

/// One line per directed edge: tau,event,from,to,stat,coef
std::string edges_to_csv(const GraphEstimate& graph);

std::string graph_to_dot(const GraphUnion& u, const GraphEstimate& graph,
                         const std::string& title);

std::string covar_to_csv(const std::vector<CovarNetwork>& nets,
                         const std::vector<std::string>& names);
std::string covar_to_json(const std::vector<CovarNetwork>& nets,
                          const std::vector<std::string>& names);

struct QgmConfigJson {
    QgmConfig config;
    std::string w_column;
    /// LowerTail events whose threshold was given as a W-quantile level:
    /// (index into config.events, level). Resolved against the sample via
    /// resolve_quantile_events().
    std::vector<std::pair<int, double>> lower_q_events;
};

/// Replaces quantile-level thresholds by the empirical W-quantiles of the
/// sample (var_tau convention).
void resolve_quantile_events(QgmConfigJson& cj, const SampleMatrix& sample);

/// Parses the JSON config document (all fields optional). Throws ConfigError.
QgmConfigJson parse_config_json(const std::string& text);
std::string config_to_json(const QgmConfig& config, const std::string& w_column);

}  // namespace qgm
