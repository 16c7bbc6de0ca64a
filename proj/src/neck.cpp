#include "giraffe/neck.hpp"

#include <algorithm>
#include <map>

namespace giraffe {
namespace {

void require_layer(int layer) {
  if (layer < 1) fail_validation("link inputs are defined for layer >= 1, got " + std::to_string(layer));
}

// Stub sources for the requested levels, checked against the pyramid.
std::map<int, NodeId> add_sources(ArchitectureGraph& g, const LevelRange& levels,
                                  const Pyramid& inputs) {
  std::map<int, NodeId> src;
  for (int k = levels.min; k <= levels.max; ++k) {
    auto it = std::find_if(inputs.begin(), inputs.end(), [k](auto& p) { return p.level == k; });
    if (it == inputs.end())
      fail_validation("input pyramid does not provide P" + std::to_string(k));
    if (it->channels <= 0) fail_validation("input pyramid width must be positive");
    NodeId id = g.add_node(SourceOp{it->channels, 1 << k}, Role::kBackbone,
                           "P" + std::to_string(k), k);
    g.add_input(id);
    src[k] = id;
  }
  return src;
}

void check_levels(const LevelRange& levels, int width) {
  if (levels.min < 0 || levels.max > 30 || levels.min > levels.max)
    fail_validation("level range must be non-empty and within 0..30");
  if (width < 1) fail_validation("neck width must be positive");
}

NodeId add_fusion(ArchitectureGraph& g, FusionStyle style, int width, int level, int layer,
                  const std::string& label) {
  return g.add_node(FusionOp{style, width, 3, true, true}, Role::kNeck, label, level, layer);
}

NodeId add_lateral(ArchitectureGraph& g, NodeId from, int width, int level, int layer) {
  NodeId id = g.add_node(ConvOp{width, 1, 1, 0, false, true}, Role::kNeck,
                         "lateral" + std::to_string(level), level, layer);
  g.add_edge(from, id);
  return id;
}

}  // namespace

std::vector<NodeKey> dense_link_inputs(int level, int layer) {
  require_layer(layer);
  std::vector<NodeKey> out;
  out.reserve(static_cast<std::size_t>(layer));
  for (int j = 0; j < layer; ++j) out.push_back({level, j});
  return out;
}

std::vector<NodeKey> log2n_link_inputs(int level, int layer) {
  require_layer(layer);
  std::vector<NodeKey> out;
  for (long long step = 1; layer - step >= 0; step *= 2)
    out.push_back({level, layer - static_cast<int>(step)});
  return out;
}

std::vector<LinkInput> queen_fusion_inputs(int level, int layer, const LevelRange& levels,
                                           SweepDirection dir) {
  require_layer(layer);
  std::vector<LinkInput> out;
  if (levels.contains(level - 1)) out.push_back({{level - 1, layer - 1}, EdgeTransform::down()});
  if (levels.contains(level + 1)) out.push_back({{level + 1, layer - 1}, EdgeTransform::up()});
  out.push_back({{level, layer - 1}, EdgeTransform::identity()});
  if (dir == SweepDirection::kBottomUp) {
    if (levels.contains(level - 1)) out.push_back({{level - 1, layer}, EdgeTransform::down()});
  } else {
    if (levels.contains(level + 1)) out.push_back({{level + 1, layer}, EdgeTransform::up()});
  }
  return out;
}

void validate_config(const GfpnConfig& cfg) {
  if (cfg.depth < 1) fail_validation("GFPN depth must be >= 1");
  check_levels(cfg.levels, cfg.width);
}

namespace {

SweepDirection sweep_of(const GfpnConfig& cfg, int layer) {
  if (cfg.within_layer_order == LayerOrder::kAlternating && layer % 2 == 0)
    return SweepDirection::kTopDown;
  return SweepDirection::kBottomUp;
}

}  // namespace

std::vector<LinkInput> gfpn_node_inputs(const GfpnConfig& cfg, int level, int layer) {
  std::vector<LinkInput> out;
  if (cfg.cross_scale == CrossScale::kQueen) {
    out = queen_fusion_inputs(level, layer, cfg.levels, sweep_of(cfg, layer));
  } else {
    require_layer(layer);
    out.push_back({{level, layer - 1}, EdgeTransform::identity()});
  }
  std::vector<NodeKey> skips;
  if (cfg.skip_mode == SkipMode::kDense) skips = dense_link_inputs(level, layer);
  if (cfg.skip_mode == SkipMode::kLog2n) skips = log2n_link_inputs(level, layer);
  std::sort(skips.begin(), skips.end(), [](auto& a, auto& b) { return a.layer > b.layer; });
  for (const NodeKey& key : skips) {
    const LinkInput candidate{key, EdgeTransform::identity()};
    if (std::find(out.begin(), out.end(), candidate) == out.end()) out.push_back(candidate);
  }
  return out;
}

ArchitectureGraph build_gfpn(const GfpnConfig& cfg, const Pyramid& inputs) {
  validate_config(cfg);
  ArchitectureGraph g("gfpn");
  auto& meta = g.metadata();
  meta["neck"] = "gfpn";
  meta["depth"] = std::to_string(cfg.depth);
  meta["width"] = std::to_string(cfg.width);
  meta["skip_mode"] = to_string(cfg.skip_mode);
  meta["cross_scale"] = to_string(cfg.cross_scale);
  meta["fusion_style"] = to_string(cfg.fusion_style);
  meta["within_layer_order"] = to_string(cfg.within_layer_order);
  meta["levels"] = std::to_string(cfg.levels.min) + ".." + std::to_string(cfg.levels.max);

  const auto sources = add_sources(g, cfg.levels, inputs);
  std::map<NodeKey, NodeId> nodes;
  for (int k = cfg.levels.min; k <= cfg.levels.max; ++k)
    nodes[{k, 0}] = add_lateral(g, sources.at(k), cfg.width, k, 0);

  for (int l = 1; l <= cfg.depth; ++l) {
    std::vector<int> order;
    for (int k = cfg.levels.min; k <= cfg.levels.max; ++k) order.push_back(k);
    if (sweep_of(cfg, l) == SweepDirection::kTopDown) std::reverse(order.begin(), order.end());
    for (int k : order) {
      NodeId id = add_fusion(g, cfg.fusion_style, cfg.width, k, l,
                             "P" + std::to_string(k) + "^" + std::to_string(l));
      for (const LinkInput& in : gfpn_node_inputs(cfg, k, l)) {
        auto it = nodes.find(in.from);
        if (it == nodes.end())
          fail_internal("GFPN builder referenced missing node P" + std::to_string(in.from.level) +
                        "^" + std::to_string(in.from.layer));
        g.add_edge(it->second, id, in.transform);
      }
      nodes[{k, l}] = id;
    }
  }
  for (int k = cfg.levels.min; k <= cfg.levels.max; ++k) g.add_output(nodes.at({k, cfg.depth}));
  return g;
}

ArchitectureGraph build_fpn(const LevelRange& levels, int width, const Pyramid& inputs,
                            int stacks) {
  check_levels(levels, width);
  if (stacks < 1) fail_validation("FPN stack count must be >= 1");
  ArchitectureGraph g("fpn");
  g.metadata()["neck"] = "fpn";
  g.metadata()["width"] = std::to_string(width);
  g.metadata()["stacks"] = std::to_string(stacks);
  std::map<int, NodeId> cur = add_sources(g, levels, inputs);
  for (int s = 0; s < stacks; ++s) {
    std::map<int, NodeId> lateral;
    for (int k = levels.min; k <= levels.max; ++k)
      lateral[k] = add_lateral(g, cur.at(k), width, k, 2 * s);
    std::map<int, NodeId> td;
    for (int k = levels.max; k >= levels.min; --k) {
      NodeId id = add_fusion(g, FusionStyle::kSum, width, k, 2 * s + 1, "fpn.td" + std::to_string(k));
      g.add_edge(lateral.at(k), id);
      if (k < levels.max) g.add_edge(td.at(k + 1), id, EdgeTransform::up());
      td[k] = id;
    }
    cur = td;
  }
  for (int k = levels.min; k <= levels.max; ++k) g.add_output(cur.at(k));
  return g;
}

ArchitectureGraph build_panet(const LevelRange& levels, int width, const Pyramid& inputs,
                              int stacks) {
  check_levels(levels, width);
  if (stacks < 1) fail_validation("PANet stack count must be >= 1");
  ArchitectureGraph g("panet");
  g.metadata()["neck"] = "panet";
  g.metadata()["width"] = std::to_string(width);
  g.metadata()["stacks"] = std::to_string(stacks);
  std::map<int, NodeId> cur = add_sources(g, levels, inputs);
  for (int s = 0; s < stacks; ++s) {
    std::map<int, NodeId> lateral;
    for (int k = levels.min; k <= levels.max; ++k)
      lateral[k] = add_lateral(g, cur.at(k), width, k, 3 * s);
    std::map<int, NodeId> td;
    for (int k = levels.max; k >= levels.min; --k) {
      NodeId id = add_fusion(g, FusionStyle::kSum, width, k, 3 * s + 1, "panet.td" + std::to_string(k));
      g.add_edge(lateral.at(k), id);
      if (k < levels.max) g.add_edge(td.at(k + 1), id, EdgeTransform::up());
      td[k] = id;
    }
    // Bottom-up path; the finest level passes through unchanged.
    std::map<int, NodeId> bu;
    bu[levels.min] = td.at(levels.min);
    for (int k = levels.min + 1; k <= levels.max; ++k) {
      NodeId id = add_fusion(g, FusionStyle::kSum, width, k, 3 * s + 2, "panet.bu" + std::to_string(k));
      g.add_edge(td.at(k), id);
      g.add_edge(bu.at(k - 1), id, EdgeTransform::down());
      bu[k] = id;
    }
    cur = bu;
  }
  for (int k = levels.min; k <= levels.max; ++k) g.add_output(cur.at(k));
  return g;
}

ArchitectureGraph build_bifpn(const LevelRange& levels, int width, const Pyramid& inputs,
                              int repeats) {
  check_levels(levels, width);
  if (repeats < 1) fail_validation("BiFPN repeat count must be >= 1");
  ArchitectureGraph g("bifpn");
  g.metadata()["neck"] = "bifpn";
  g.metadata()["width"] = std::to_string(width);
  g.metadata()["repeats"] = std::to_string(repeats);
  const auto sources = add_sources(g, levels, inputs);
  std::map<int, NodeId> in;
  for (int k = levels.min; k <= levels.max; ++k) in[k] = add_lateral(g, sources.at(k), width, k, 0);

  for (int r = 1; r <= repeats; ++r) {
    // Top-down intermediates exist only for interior levels.
    std::map<int, NodeId> mid;
    for (int k = levels.max - 1; k > levels.min; --k) {
      NodeId id = add_fusion(g, FusionStyle::kSum, width, k, 2 * r - 1,
                             "bifpn.mid" + std::to_string(k));
      g.add_edge(in.at(k), id);
      g.add_edge(k + 1 == levels.max ? in.at(k + 1) : mid.at(k + 1), id, EdgeTransform::up());
      mid[k] = id;
    }
    std::map<int, NodeId> out;
    for (int k = levels.min; k <= levels.max; ++k) {
      NodeId id = add_fusion(g, FusionStyle::kSum, width, k, 2 * r, "bifpn.out" + std::to_string(k));
      if (mid.count(k)) {
        g.add_edge(mid.at(k), id);
        g.add_edge(out.at(k - 1), id, EdgeTransform::down());
        g.add_edge(in.at(k), id);
      } else if (k == levels.min) {
        g.add_edge(in.at(k), id);
        if (k < levels.max) {
          NodeId upper = mid.count(k + 1) ? mid.at(k + 1) : in.at(k + 1);
          g.add_edge(upper, id, EdgeTransform::up());
        }
      } else {
        g.add_edge(in.at(k), id);
        g.add_edge(out.at(k - 1), id, EdgeTransform::down());
      }
      out[k] = id;
    }
    in = out;
  }
  for (int k = levels.min; k <= levels.max; ++k) g.add_output(in.at(k));
  return g;
}

int depth_accounting(NeckKind kind, int layers) {
  if (layers < 0) fail_validation("layer count must be non-negative");
  switch (kind) {
    case NeckKind::kPanet:
    case NeckKind::kBifpn: return 2 * layers;
    default: return layers;
  }
}

std::string to_string(SkipMode m) {
  switch (m) {
    case SkipMode::kNone: return "none";
    case SkipMode::kDense: return "dense";
    case SkipMode::kLog2n: return "log2n";
  }
  return "none";
}

std::string to_string(CrossScale c) { return c == CrossScale::kQueen ? "queen" : "none"; }

std::string to_string(LayerOrder o) {
  return o == LayerOrder::kBottomUp ? "bottom_up" : "alternating";
}

std::string to_string(FusionStyle s) { return s == FusionStyle::kConcat ? "concat" : "sum"; }

std::string to_string(NeckKind k) {
  switch (k) {
    case NeckKind::kGfpn: return "gfpn";
    case NeckKind::kFpn: return "fpn";
    case NeckKind::kPanet: return "panet";
    case NeckKind::kBifpn: return "bifpn";
  }
  return "gfpn";
}

SkipMode parse_skip_mode(const std::string& s) {
  if (s == "none") return SkipMode::kNone;
  if (s == "dense") return SkipMode::kDense;
  if (s == "log2n") return SkipMode::kLog2n;
  fail_usage("unknown skip mode '" + s + "' (expected none, dense, log2n)");
}

CrossScale parse_cross_scale(const std::string& s) {
  if (s == "queen") return CrossScale::kQueen;
  if (s == "none") return CrossScale::kNone;
  fail_usage("unknown cross-scale mode '" + s + "' (expected queen, none)");
}

LayerOrder parse_layer_order(const std::string& s) {
  if (s == "bottom_up" || s == "bottom-up") return LayerOrder::kBottomUp;
  if (s == "alternating") return LayerOrder::kAlternating;
  fail_usage("unknown layer order '" + s + "' (expected bottom_up, alternating)");
}

FusionStyle parse_fusion_style(const std::string& s) {
  if (s == "concat") return FusionStyle::kConcat;
  if (s == "sum") return FusionStyle::kSum;
  fail_usage("unknown fusion style '" + s + "' (expected concat, sum)");
}

NeckKind parse_neck_kind(const std::string& s) {
  if (s == "gfpn") return NeckKind::kGfpn;
  if (s == "fpn") return NeckKind::kFpn;
  if (s == "panet") return NeckKind::kPanet;
  if (s == "bifpn") return NeckKind::kBifpn;
  fail_usage("unknown neck '" + s + "' (expected gfpn, fpn, panet, bifpn)");
}

}  // namespace giraffe
