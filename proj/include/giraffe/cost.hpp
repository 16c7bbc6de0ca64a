#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "giraffe/graph.hpp"
#include "giraffe/neck.hpp"

namespace giraffe {

/// kMac: 1 FLOP = 1 multiply-accumulate of a convolution; bias, activation,
/// resampling, rearrangement and concatenation are free.
/// kStrict: additionally charges one FLOP per output element for
/// bias adds, SiLU, up/down-sampling and each pairwise summation.
enum class CostMode { kMac, kStrict };

/// Requires an inferred shape on the node and its predecessors.
std::uint64_t flops_of(const ArchitectureGraph& g, NodeId id, CostMode mode = CostMode::kMac);

/// kh*kw*in*out weights (+ out bias) for every conv inside the node,
/// including 1x1 edge projections.
std::uint64_t params_of(const ArchitectureGraph& g, NodeId id);

struct CostRow {
  NodeId id;
  std::string kind;   // "Convolution Layer", "SiLU Layer", ...
  std::string label;
  Role role = Role::kBackbone;
  int filters = 0;       // conv/fusion only
  std::string filter;    // "3 x 3 x 32"
  int stride = 0;
  int padding = 0;
  Shape shape;
  std::uint64_t flops = 0;
  std::uint64_t cumulative = 0;
  std::uint64_t params = 0;
};

struct CostReport {
  std::string graph;
  Shape input;
  CostMode mode = CostMode::kMac;
  std::vector<CostRow> rows;  // topological order
  std::uint64_t backbone_flops = 0;
  std::uint64_t neck_flops = 0;
  std::uint64_t total_flops = 0;
  std::uint64_t backbone_params = 0;
  std::uint64_t neck_params = 0;
  std::uint64_t total_params = 0;
};

CostReport analyze(const ArchitectureGraph& g, const Shape& input, CostMode mode = CostMode::kMac);

/// Sum of params_of over all nodes. Requires inferred shapes.
std::uint64_t param_count(const ArchitectureGraph& g);

/// Giga-FLOPs rounded half-up to two decimals.
double to_gflops(std::uint64_t flops);

struct LevelPaths {
  int level = 0;
  /// Shortest same-level hop count from the level's entry node (lowest layer)
  /// to each node of the level, keyed by layer. -1 = unreachable.
  std::map<int, int> same_level;
  /// Same, but paths may leave the level.
  std::map<int, int> full_graph;
  int max_same_level = 0;
  int max_full_graph = 0;
};

struct TopologyReport {
  std::string neck;
  int layers = 0;
  int effective_depth = 0;
  std::size_t node_count = 0;   // neck nodes
  std::size_t edge_count = 0;   // edges into neck nodes
  /// Same-level in-edges (includes the adjacent layer).
  std::size_t same_level_edges = 0;
  /// Same-level in-edges spanning two or more layers.
  std::size_t skip_edges = 0;
  std::map<std::string, std::size_t> edges_by_transform;
  std::vector<LevelPaths> levels;
  int max_same_level = 0;
  int max_full_graph = 0;
};

/// BFS path lengths and edge tallies over the neck nodes of `g`.
TopologyReport path_report(const ArchitectureGraph& g, NeckKind kind, int layers);

/// Smallest width whose FLOPs come closest to `target`, by bisection over a
/// non-decreasing cost curve on [lo, hi].
int match_width(const std::function<std::uint64_t(int)>& flops_at_width, std::uint64_t target,
                int lo = 1, int hi = 4096);

}  // namespace giraffe
