#include "qgm/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qgm {

using nlohmann::json;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CsvError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
}

std::string content_digest(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // prefer the shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char cand[32];
        std::snprintf(cand, sizeof(cand), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(cand, "%lf", &back);
        if (back == v) return cand;
    }
    return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

SampleMatrix parse_csv(const std::string& text, const std::string& w_column,
                       const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw CsvError(origin + ": empty file");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
        line.erase(0, 3);  // UTF-8 BOM
    std::vector<std::string> header = split_line(line);
    const int ncol = static_cast<int>(header.size());
    int w_idx = -1;
    if (!w_column.empty()) {
        for (int j = 0; j < ncol; ++j)
            if (header[j] == w_column) w_idx = j;
        if (w_idx < 0)
            throw CsvError(origin + ": conditioning column '" + w_column +
                           "' not in header");
    }

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (static_cast<int>(cells.size()) != ncol)
            throw CsvError(origin + ":" + std::to_string(lineno) + ": expected " +
                           std::to_string(ncol) + " fields, found " +
                           std::to_string(cells.size()));
        std::vector<double> vals(ncol);
        for (int j = 0; j < ncol; ++j) {
            const std::string& cell = cells[j];
            double v = 0.0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || p != cell.data() + cell.size())
                throw CsvError(origin + ":" + std::to_string(lineno) + ": column " +
                               std::to_string(j + 1) + " ('" + header[j] +
                               "'): cannot parse '" + cell + "' as a real number");
            vals[j] = v;
        }
        rows.push_back(std::move(vals));
    }
    if (rows.size() < 2) throw CsvError(origin + ": need at least 2 data rows");

    SampleMatrix s;
    const int n = static_cast<int>(rows.size());
    const int d = w_idx >= 0 ? ncol - 1 : ncol;
    if (d < 2) throw CsvError(origin + ": need at least 2 variable columns");
    s.values.resize(n, d);
    if (w_idx >= 0) s.w = Eigen::VectorXd(n);
    for (int j = 0, jj = 0; j < ncol; ++j) {
        if (j == w_idx) continue;
        s.names.push_back(header[j]);
        for (int i = 0; i < n; ++i) s.values(i, jj) = rows[i][j];
        ++jj;
    }
    if (w_idx >= 0)
        for (int i = 0; i < n; ++i) (*s.w)[i] = rows[i][w_idx];
    try {
        s.validate();
    } catch (const std::exception& ex) {
        throw CsvError(origin + ": " + ex.what());
    }
    return s;
}

SampleMatrix read_csv(const std::string& path, const std::string& w_column) {
    return parse_csv(read_text_file(path), w_column, path);
}

namespace {

json edge_to_json(const EdgeStat& e, const GraphEstimate& g) {
    return json{{"from", g.names[e.from]},
                {"to", g.names[e.to]},
                {"stat", e.stat},
                {"coef", e.coef}};
}

}  // namespace

std::string graph_to_json(const GraphEstimate& graph, const std::string& meta_json) {
    json doc;
    doc["meta"] = meta_json.empty() ? json::object() : json::parse(meta_json);
    doc["taus"] = graph.taus;
    doc["events"] = graph.event_labels;
    doc["graphs"] = json::array();
    for (const auto& layer : graph.layers) {
        json edges = json::array();
        for (const auto& e : layer.edges) edges.push_back(edge_to_json(e, graph));
        doc["graphs"].push_back(json{{"tau", graph.taus[layer.tau_idx]},
                                     {"event", graph.event_labels[layer.event_idx]},
                                     {"edges", edges}});
    }
    doc["unions"] = json::array();
    for (const auto& u : graph.unions) {
        json edges = json::array();
        for (const auto& e : u.edges) edges.push_back(edge_to_json(e, graph));
        doc["unions"].push_back(
            json{{"event", graph.event_labels[u.event_idx]}, {"edges", edges}});
    }
    if (!graph.failed_nodes.empty()) {
        json f = json::array();
        for (int a : graph.failed_nodes) f.push_back(graph.names[a]);
        doc["failed_nodes"] = f;
    }
    return doc.dump(2) + "\n";
}

std::string edges_to_csv(const GraphEstimate& graph) {
    std::ostringstream out;
    out << "tau,event,from,to,stat,coef\n";
    for (const auto& layer : graph.layers) {
        for (const auto& e : layer.edges) {
            out << format_double(graph.taus[layer.tau_idx]) << ','
                << graph.event_labels[layer.event_idx] << ',' << graph.names[e.from]
                << ',' << graph.names[e.to] << ',' << format_double(e.stat) << ','
                << format_double(e.coef) << '\n';
        }
    }
    return out.str();
}

std::string graph_to_dot(const GraphUnion& u, const GraphEstimate& graph,
                         const std::string& title) {
    std::ostringstream out;
    out << "digraph \"" << title << "\" {\n";
    for (const auto& name : graph.names) out << "  \"" << name << "\";\n";
    for (const auto& e : u.edges)
        out << "  \"" << graph.names[e.from] << "\" -> \"" << graph.names[e.to]
            << "\";\n";
    out << "}\n";
    return out.str();
}

std::string covar_to_csv(const std::vector<CovarNetwork>& nets,
                         const std::vector<std::string>& names) {
    std::ostringstream out;
    out << "tau,node,to_deg,from_deg,net\n";
    for (const auto& net : nets) {
        for (std::size_t a = 0; a < names.size(); ++a) {
            out << format_double(net.tau) << ',' << names[a] << ','
                << format_double(net.to_deg[a]) << ','
                << format_double(net.from_deg[a]) << ','
                << format_double(net.net[a]) << '\n';
        }
    }
    return out.str();
}

std::string covar_to_json(const std::vector<CovarNetwork>& nets,
                          const std::vector<std::string>& names) {
    json doc = json::array();
    for (const auto& net : nets) {
        json nodes = json::array();
        for (std::size_t a = 0; a < names.size(); ++a) {
            nodes.push_back(json{{"node", names[a]},
                                 {"to", net.to_deg[a]},
                                 {"from", net.from_deg[a]},
                                 {"net", net.net[a]}});
        }
        json delta = json::array();
        for (int a = 0; a < net.delta.rows(); ++a) {
            json row = json::array();
            for (int b = 0; b < net.delta.cols(); ++b) row.push_back(net.delta(a, b));
            delta.push_back(row);
        }
        doc.push_back(json{{"tau", net.tau},
                           {"total", net.total},
                           {"nodes", nodes},
                           {"delta", delta}});
    }
    return doc.dump(2) + "\n";
}

QgmConfigJson parse_config_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const std::exception& ex) {
        throw ConfigError(std::string("config JSON: ") + ex.what());
    }
    QgmConfigJson out;
    QgmConfig& c = out.config;
    try {
        if (doc.contains("c_slack")) c.c_slack = doc["c_slack"].get<double>();
        if (doc.contains("gamma_level") && !doc["gamma_level"].is_null())
            c.gamma_level = doc["gamma_level"].get<double>();
        if (doc.contains("B_penalty")) c.B_penalty = doc["B_penalty"].get<int>();
        if (doc.contains("B_boot")) c.B_boot = doc["B_boot"].get<int>();
        if (doc.contains("bandwidth_const"))
            c.bandwidth_const = doc["bandwidth_const"].get<double>();
        if (doc.contains("density_floor"))
            c.density_floor = doc["density_floor"].get<double>();
        if (doc.contains("kkt_tol")) c.kkt_tol = doc["kkt_tol"].get<double>();
        if (doc.contains("alpha_grid_points"))
            c.alpha_grid_points = doc["alpha_grid_points"].get<int>();
        if (doc.contains("taus"))
            c.tau_grid.taus = doc["taus"].get<std::vector<double>>();
        if (doc.contains("expansions"))
            c.expansions = doc["expansions"].get<std::vector<std::string>>();
        if (doc.contains("d_w")) c.d_w = doc["d_w"].get<int>();
        if (doc.contains("stepdown")) c.stepdown = doc["stepdown"].get<bool>();
        if (doc.contains("cv_level") && !doc["cv_level"].is_null())
            c.cv_level = doc["cv_level"].get<double>();
        if (doc.contains("threads")) c.threads = doc["threads"].get<int>();
        if (doc.contains("seed")) c.master_seed = doc["seed"].get<std::uint64_t>();
        if (doc.contains("w_column")) out.w_column = doc["w_column"].get<std::string>();
        if (doc.contains("events")) {
            c.events.clear();
            for (const auto& ev : doc["events"]) {
                const std::string kind = ev.value("kind", "trivial");
                if (kind == "trivial") {
                    c.events.push_back(EventSpec::trivial(ev.value("label", "all")));
                } else if (kind == "lower") {
                    if (ev.contains("q")) {
                        const double q = ev["q"].get<double>();
                        std::string label =
                            ev.value("label", "lower(q=" + format_double(q) + ")");
                        out.lower_q_events.emplace_back(
                            static_cast<int>(c.events.size()), q);
                        c.events.push_back(EventSpec::lower_tail(0.0, label));
                    } else {
                        const double thr = ev.at("threshold").get<double>();
                        c.events.push_back(EventSpec::lower_tail(
                            thr, ev.value("label", "lower(" + format_double(thr) + ")")));
                    }
                } else if (kind == "interval") {
                    c.events.push_back(EventSpec::interval(
                        ev.at("lo").get<double>(), ev.at("hi").get<double>(),
                        ev.value("label", "interval")));
                } else {
                    throw ConfigError("unknown event kind: " + kind);
                }
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ConfigError(std::string("config JSON: ") + ex.what());
    }
    return out;
}

void resolve_quantile_events(QgmConfigJson& cj, const SampleMatrix& sample) {
    if (cj.lower_q_events.empty()) return;
    if (!sample.w)
        throw ConfigError("lower-tail quantile events need a conditioning column");
    for (const auto& [idx, q] : cj.lower_q_events) {
        if (!(q > 0.0 && q < 1.0))
            throw ConfigError("lower-tail quantile level outside (0,1)");
        cj.config.events[idx].hi = var_tau(*sample.w, q);
    }
    cj.lower_q_events.clear();
}

std::string config_to_json(const QgmConfig& c, const std::string& w_column) {
    json doc;
    doc["c_slack"] = c.c_slack;
    if (c.gamma_level > 0.0)
        doc["gamma_level"] = c.gamma_level;
    else
        doc["gamma_level"] = nullptr;
    doc["B_penalty"] = c.B_penalty;
    doc["B_boot"] = c.B_boot;
    doc["bandwidth_const"] = c.bandwidth_const;
    doc["density_floor"] = c.density_floor;
    doc["kkt_tol"] = c.kkt_tol;
    doc["alpha_grid_points"] = c.alpha_grid_points;
    doc["taus"] = c.tau_grid.taus;
    doc["expansions"] = c.expansions;
    doc["d_w"] = c.d_w;
    doc["stepdown"] = c.stepdown;
    if (c.cv_level > 0.0)
        doc["cv_level"] = c.cv_level;
    else
        doc["cv_level"] = nullptr;
    doc["threads"] = c.threads;
    doc["seed"] = c.master_seed;
    if (!w_column.empty()) doc["w_column"] = w_column;
    json events = json::array();
    for (const auto& ev : c.events) {
        json e;
        e["label"] = ev.label;
        switch (ev.kind) {
            case EventSpec::Kind::Trivial:
                e["kind"] = "trivial";
                break;
            case EventSpec::Kind::LowerTail:
                e["kind"] = "lower";
                e["threshold"] = ev.hi;
                break;
            case EventSpec::Kind::Interval:
                e["kind"] = "interval";
                e["lo"] = ev.lo;
                e["hi"] = ev.hi;
                break;
        }
        events.push_back(e);
    }
    doc["events"] = events;
    return doc.dump(2);
}

}  // namespace qgm
