#include "stgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "stgcn/errors.hpp"

namespace stgcn {

namespace {

// Root gets label 0; neighbors get 1..N sorted by priority_value.
LabelMapping ordered_split(const SkeletonGraph& g, Strategy s,
                           const std::function<double(int)>& priority_value,
                           bool descending) {
    LabelMapping m;
    m.strategy = s;
    m.kernel_size = kernel_size(s);
    m.labels.resize(g.num_nodes);
    m.priority_sets.resize(g.num_nodes);
    for (int root = 0; root < g.num_nodes; ++root) {
        std::vector<int> members = neighbor_set(g, root).adjacent;
        // Ties go to the lower joint index; members is already ascending.
        std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
            const double va = priority_value(a);
            const double vb = priority_value(b);
            return descending ? va > vb : va < vb;
        });
        m.labels[root][root] = 0;
        for (std::size_t pos = 0; pos < members.size(); ++pos) {
            m.labels[root][members[pos]] = static_cast<int>(pos) + 1;
            m.priority_sets[root].push_back(priority_value(members[pos]));
        }
    }
    return m;
}

}  // namespace

int SkeletonGraph::degree(int node) const {
    int d = 0;
    for (int j = 0; j < num_nodes; ++j) d += adjacency[node * num_nodes + j];
    return d;
}

std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::UniLabel: return "uni";
        case Strategy::Distance: return "distance";
        case Strategy::SpatialConfig: return "spatial";
        case Strategy::FullDistance: return "full-distance";
        case Strategy::Connection: return "connection";
        case Strategy::Index: return "index";
    }
    return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
    for (Strategy s : kAllStrategies) {
        if (strategy_name(s) == name) return s;
    }
    return std::nullopt;
}

int kernel_size(Strategy s) {
    switch (s) {
        case Strategy::UniLabel: return 1;
        case Strategy::Distance: return 2;
        case Strategy::SpatialConfig: return 3;
        case Strategy::FullDistance:
        case Strategy::Connection:
        case Strategy::Index: return 4;
    }
    return 0;
}

bool needs_template(Strategy s) {
    return s == Strategy::SpatialConfig || s == Strategy::FullDistance;
}

SkeletonGraph build_openpose18_graph() {
    SkeletonGraph g;
    g.edges = {{0, 1},  {1, 2},   {2, 3},   {3, 4},   {1, 5},   {5, 6},
               {6, 7},  {2, 8},   {8, 9},   {9, 10},  {5, 11},  {11, 12},
               {12, 13}, {0, 14}, {0, 15},  {14, 16}, {15, 17}};
    g.adjacency.assign(static_cast<std::size_t>(g.num_nodes * g.num_nodes), 0);
    for (auto [a, b] : g.edges) {
        g.adjacency[a * g.num_nodes + b] = 1;
        g.adjacency[b * g.num_nodes + a] = 1;
    }
    return g;
}

NeighborSet neighbor_set(const SkeletonGraph& g, int root) {
    if (root < 0 || root >= g.num_nodes) {
        throw IndexError("neighbor_set: root " + std::to_string(root) + " outside [0, " +
                         std::to_string(g.num_nodes) + ")");
    }
    NeighborSet ns{root, {}};
    for (int j = 0; j < g.num_nodes; ++j) {
        if (g.adjacent(root, j)) ns.adjacent.push_back(j);
    }
    return ns;
}

LabelMapping label_map_unilabel(const SkeletonGraph& g) {
    LabelMapping m;
    m.strategy = Strategy::UniLabel;
    m.kernel_size = 1;
    m.labels.resize(g.num_nodes);
    m.priority_sets.resize(g.num_nodes);
    for (int root = 0; root < g.num_nodes; ++root) {
        m.labels[root][root] = 0;
        for (int j : neighbor_set(g, root).adjacent) m.labels[root][j] = 0;
    }
    return m;
}

LabelMapping label_map_distance(const SkeletonGraph& g) {
    LabelMapping m;
    m.strategy = Strategy::Distance;
    m.kernel_size = 2;
    m.labels.resize(g.num_nodes);
    m.priority_sets.resize(g.num_nodes);
    for (int root = 0; root < g.num_nodes; ++root) {
        m.labels[root][root] = 0;
        for (int j : neighbor_set(g, root).adjacent) m.labels[root][j] = 1;
    }
    return m;
}

LabelMapping label_map_spatial(const SkeletonGraph& g, const SkeletonTemplate& tpl) {
    tpl.validate();
    LabelMapping m;
    m.strategy = Strategy::SpatialConfig;
    m.kernel_size = 3;
    m.labels.resize(g.num_nodes);
    m.priority_sets.resize(g.num_nodes);
    for (int root = 0; root < g.num_nodes; ++root) {
        const double r_root = tpl.r[root];
        m.labels[root][root] = 0;
        for (int j : neighbor_set(g, root).adjacent) {
            const double r_j = tpl.r[j];
            // 1: closer to the center of gravity than the root, 2: farther.
            m.labels[root][j] = r_j == r_root ? 0 : (r_j < r_root ? 1 : 2);
        }
    }
    return m;
}

LabelMapping label_map_full_distance(const SkeletonGraph& g, const SkeletonTemplate& tpl) {
    tpl.validate();
    return ordered_split(g, Strategy::FullDistance, [&](int j) { return tpl.r[j]; }, false);
}

LabelMapping label_map_connection(const SkeletonGraph& g) {
    return ordered_split(g, Strategy::Connection,
                         [&](int j) { return static_cast<double>(g.degree(j)); }, true);
}

LabelMapping label_map_index(const SkeletonGraph& g) {
    return ordered_split(g, Strategy::Index, [](int j) { return static_cast<double>(j); }, false);
}

LabelMapping label_map(const SkeletonGraph& g, Strategy s, const SkeletonTemplate* tpl) {
    if (needs_template(s) && tpl == nullptr) {
        throw ConfigError(std::string("strategy '") + std::string(strategy_name(s)) +
                          "' requires a skeleton template");
    }
    switch (s) {
        case Strategy::UniLabel: return label_map_unilabel(g);
        case Strategy::Distance: return label_map_distance(g);
        case Strategy::SpatialConfig: return label_map_spatial(g, *tpl);
        case Strategy::FullDistance: return label_map_full_distance(g, *tpl);
        case Strategy::Connection: return label_map_connection(g);
        case Strategy::Index: return label_map_index(g);
    }
    throw InternalError("label_map: unknown strategy");
}

PartitionedAdjacency partitioned_adjacency(const SkeletonGraph& g, const LabelMapping& mapping) {
    if (static_cast<int>(mapping.labels.size()) != g.num_nodes) {
        throw InternalError("partitioned_adjacency: mapping covers " +
                            std::to_string(mapping.labels.size()) + " roots, expected " +
                            std::to_string(g.num_nodes));
    }
    const int n = g.num_nodes;
    PartitionedAdjacency pa;
    pa.kernel_size = mapping.kernel_size;
    pa.num_nodes = n;
    pa.matrices.assign(mapping.kernel_size, std::vector<double>(static_cast<std::size_t>(n * n), 0.0));
    for (int root = 0; root < n; ++root) {
        for (auto [member, label] : mapping.labels[root]) {
            if (label < 0 || label >= mapping.kernel_size) {
                throw InternalError("partitioned_adjacency: label " + std::to_string(label) +
                                    " at root " + std::to_string(root) + " outside [0, " +
                                    std::to_string(mapping.kernel_size) + ")");
            }
            if (member != root && !g.adjacent(root, member)) {
                throw InternalError("partitioned_adjacency: joint " + std::to_string(member) +
                                    " is not a neighbor of root " + std::to_string(root));
            }
            pa.matrices[label][root * n + member] = 1.0;
        }
    }
    return pa;
}

PartitionedAdjacency normalize_partitions(const PartitionedAdjacency& pa, double alpha) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw ConfigError("normalize_partitions: alpha must be a finite non-negative value");
    }
    PartitionedAdjacency out = pa;
    const int n = pa.num_nodes;
    for (auto& mat : out.matrices) {
        for (int i = 0; i < n; ++i) {
            const auto row = mat.begin() + i * n;
            const double sum = std::accumulate(row, row + n, 0.0);
            if (sum == 0.0) continue;
            const double denom = sum + alpha;
            std::for_each(row, row + n, [denom](double& v) { v /= denom; });
        }
    }
    out.normalized = true;
    return out;
}

}  // namespace stgcn
