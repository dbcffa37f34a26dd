#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stgcn/skeleton_template.hpp"

namespace stgcn {

inline constexpr int kNumJoints = 18;

using Edge = std::pair<int, int>;

// Fixed OpenPose-COCO 18 keypoint skeleton.
struct SkeletonGraph {
    int num_nodes = kNumJoints;
    std::vector<Edge> edges;
    // Row-major num_nodes x num_nodes, 0/1.
    std::vector<int> adjacency;

    [[nodiscard]] bool adjacent(int i, int j) const { return adjacency[i * num_nodes + j] != 0; }
    [[nodiscard]] int degree(int node) const;
};

struct NeighborSet {
    int root = 0;
    std::vector<int> adjacent;  // ascending joint index
};

enum class Strategy { UniLabel, Distance, SpatialConfig, FullDistance, Connection, Index };

inline constexpr std::array<Strategy, 6> kAllStrategies = {
    Strategy::UniLabel,     Strategy::Distance,   Strategy::SpatialConfig,
    Strategy::FullDistance, Strategy::Connection, Strategy::Index};

// CLI vocabulary: uni, distance, spatial, full-distance, connection, index.
std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
int kernel_size(Strategy s);
bool needs_template(Strategy s);

struct LabelMapping {
    Strategy strategy = Strategy::UniLabel;
    int kernel_size = 1;
    // labels[root] maps every member of root's neighbor set (root included)
    // to its label in [0, kernel_size).
    std::vector<std::map<int, int>> labels;
    // Sorted auxiliary sequence per root: distances (FullDistance), degrees
    // (Connection) or keypoint indices (Index). Empty for other strategies.
    std::vector<std::vector<double>> priority_sets;
};

struct PartitionedAdjacency {
    int kernel_size = 0;
    int num_nodes = kNumJoints;
    // kernel_size matrices, each num_nodes x num_nodes row-major.
    // Entry (i, j) of matrix k weights neighbor j when aggregating at root i.
    std::vector<std::vector<double>> matrices;
    bool normalized = false;

    [[nodiscard]] double at(int k, int i, int j) const { return matrices[k][i * num_nodes + j]; }
};

SkeletonGraph build_openpose18_graph();

// Throws IndexError for roots outside [0, num_nodes).
NeighborSet neighbor_set(const SkeletonGraph& g, int root);

LabelMapping label_map_unilabel(const SkeletonGraph& g);
LabelMapping label_map_distance(const SkeletonGraph& g);
LabelMapping label_map_spatial(const SkeletonGraph& g, const SkeletonTemplate& tpl);
LabelMapping label_map_full_distance(const SkeletonGraph& g, const SkeletonTemplate& tpl);
LabelMapping label_map_connection(const SkeletonGraph& g);
LabelMapping label_map_index(const SkeletonGraph& g);

// Dispatches on strategy. Throws ConfigError when the strategy needs a
// template and none is given.
LabelMapping label_map(const SkeletonGraph& g, Strategy s,
                       const SkeletonTemplate* tpl = nullptr);

PartitionedAdjacency partitioned_adjacency(const SkeletonGraph& g, const LabelMapping& mapping);

// Divides row i of every matrix by (row sum + alpha).
PartitionedAdjacency normalize_partitions(const PartitionedAdjacency& pa, double alpha = 0.001);

}  // namespace stgcn
