#pragma once

#include <string>
#include <utility>
#include <vector>

#include "giraffe/backbone.hpp"
#include "giraffe/graph.hpp"

namespace giraffe {

enum class SkipMode { kNone, kDense, kLog2n };
enum class CrossScale { kQueen, kNone };
/// kAlternating sweeps odd layers bottom-up and even layers top-down.
enum class LayerOrder { kBottomUp, kAlternating };
enum class SweepDirection { kBottomUp, kTopDown };
enum class NeckKind { kGfpn, kFpn, kPanet, kBifpn };

/// Inclusive range of pyramid levels.
struct LevelRange {
  int min = 3;
  int max = 7;

  int count() const { return max - min + 1; }
  bool contains(int k) const { return k >= min && k <= max; }
  friend bool operator==(const LevelRange&, const LevelRange&) = default;
};

struct GfpnConfig {
  int depth = 1;   // number of fusion layers; layer 0 holds the projections
  int width = 256;
  SkipMode skip_mode = SkipMode::kLog2n;
  CrossScale cross_scale = CrossScale::kQueen;
  FusionStyle fusion_style = FusionStyle::kConcat;
  LevelRange levels{};
  LayerOrder within_layer_order = LayerOrder::kBottomUp;

  friend bool operator==(const GfpnConfig&, const GfpnConfig&) = default;
};

/// (level, layer) coordinate of a neck node.
struct NodeKey {
  int level = 0;
  int layer = 0;
  friend auto operator<=>(const NodeKey&, const NodeKey&) = default;
};

struct LinkInput {
  NodeKey from;
  EdgeTransform transform;
  friend bool operator==(const LinkInput&, const LinkInput&) = default;
};

/// Dense skip inputs of P_k^l: every earlier layer, ascending.
std::vector<NodeKey> dense_link_inputs(int level, int layer);

/// log2n skip inputs of P_k^l: layers l - 2^n for n = 0, 1, ... while >= 0,
/// so the nearest layer comes first.
std::vector<NodeKey> log2n_link_inputs(int level, int layer);

/// Queen-fusion inputs of P_k^l, in fusion order:
///   (k-1, l-1) down, (k+1, l-1) up, (k, l-1) identity, (k-1, l) down.
/// Neighbours outside `levels` are dropped. For a top-down sweep the
/// current-layer neighbour is (k+1, l) upsampled instead.
std::vector<LinkInput> queen_fusion_inputs(int level, int layer, const LevelRange& levels,
                                           SweepDirection dir = SweepDirection::kBottomUp);

/// Full fusion input list for P_k^l under `cfg`: queen (or same-level) inputs
/// first, then the remaining skip inputs by descending layer, deduplicated.
std::vector<LinkInput> gfpn_node_inputs(const GfpnConfig& cfg, int level, int layer);

void validate_config(const GfpnConfig& cfg);

ArchitectureGraph build_gfpn(const GfpnConfig& cfg, const Pyramid& inputs);
ArchitectureGraph build_fpn(const LevelRange& levels, int width, const Pyramid& inputs,
                            int stacks = 1);
ArchitectureGraph build_panet(const LevelRange& levels, int width, const Pyramid& inputs,
                              int stacks = 1);
ArchitectureGraph build_bifpn(const LevelRange& levels, int width, const Pyramid& inputs,
                              int repeats = 1);

/// Depth for fair comparison: PANet and BiFPN layers count twice.
int depth_accounting(NeckKind kind, int layers);

std::string to_string(SkipMode m);
std::string to_string(CrossScale c);
std::string to_string(LayerOrder o);
std::string to_string(FusionStyle s);
std::string to_string(NeckKind k);
SkipMode parse_skip_mode(const std::string& s);
CrossScale parse_cross_scale(const std::string& s);
LayerOrder parse_layer_order(const std::string& s);
FusionStyle parse_fusion_style(const std::string& s);
NeckKind parse_neck_kind(const std::string& s);

}  // namespace giraffe
