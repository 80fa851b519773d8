#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace qgm {

struct EdgeStat {
    int from = 0;
    int to = 0;
    double stat = 0.0;
    double coef = 0.0;
};

/// Directed graph estimate at one (tau, event) pair.
struct GraphLayer {
    int tau_idx = 0;
    int event_idx = 0;
    Eigen::MatrixXi adjacency;  // entries in {0,1}, zero diagonal
    std::vector<EdgeStat> edges;
};

/// Union over the tau grid for one event; stat keeps the per-edge max.
struct GraphUnion {
    int event_idx = 0;
    Eigen::MatrixXi adjacency;
    std::vector<EdgeStat> edges;
};

struct GraphEstimate {
    int d = 0;
    std::vector<std::string> names;
    std::vector<double> taus;
    std::vector<std::string> event_labels;
    std::vector<GraphLayer> layers;  // event-major, then tau
    std::vector<GraphUnion> unions;  // one per event
    std::vector<int> failed_nodes;

    GraphLayer& layer(int event_idx, int tau_idx) {
        return layers[event_idx * taus.size() + tau_idx];
    }
    const GraphLayer& layer(int event_idx, int tau_idx) const {
        return layers[event_idx * taus.size() + tau_idx];
    }
};

/// Rebuilds per-event unions as set unions of the per-tau layers.
void build_unions(GraphEstimate& graph);

}  // namespace qgm
