#pragma once

#include <optional>
#include <string>

#include "giraffe/backbone.hpp"
#include "giraffe/graph.hpp"
#include "giraffe/neck.hpp"

namespace giraffe {

/// Everything needed to assemble backbone + neck into one graph.
struct ModelSpec {
  /// Family member ("D11"); mutually exclusive with an explicit depth.
  std::optional<std::string> model;
  std::optional<int> depth;
  std::optional<int> width;
  /// "gfpn", "fpn", "panet", "bifpn", or "none" for a bare backbone.
  std::string neck = "gfpn";
  SkipMode skip_mode = SkipMode::kLog2n;
  CrossScale cross_scale = CrossScale::kQueen;
  FusionStyle fusion_style = FusionStyle::kConcat;
  LayerOrder within_layer_order = LayerOrder::kBottomUp;
  LevelRange levels{};
  /// "s2d" or "stub:<level>=<channels>,...". A bare "stub" mirrors the S2D taps.
  std::string backbone = "s2d";
};

/// GFPN model used when neither a model nor a depth is given. Other necks
/// default to one stack at width 256.
inline constexpr const char* kDefaultModel = "D7";

/// Resolved neck depth and width (family entry or explicit values).
std::pair<int, int> resolve_dims(const ModelSpec& spec);

ArchitectureGraph build_backbone(const std::string& backbone);
ArchitectureGraph build_model(const ModelSpec& spec);

}  // namespace giraffe
