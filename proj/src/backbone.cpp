#include "giraffe/backbone.hpp"

#include <algorithm>
#include <sstream>

namespace giraffe {

ArchitectureGraph build_s2d_chain(const S2DChainConfig& cfg) {
  if (cfg.stage_channels.size() != 5)
    fail_validation("S2D chain needs exactly 5 stage widths (P3..P7), got " +
                    std::to_string(cfg.stage_channels.size()));
  for (int c : cfg.stage_channels)
    if (c <= 0) fail_validation("S2D chain stage widths must be positive");
  if (cfg.stem_channels.first <= 0 || cfg.stem_channels.second <= 0)
    fail_validation("S2D chain stem widths must be positive");

  ArchitectureGraph g("s2d-chain");
  g.metadata()["backbone"] = "s2d";
  NodeId image = g.add_node(InputOp{}, Role::kBackbone, "image");
  g.add_input(image);

  auto conv_stage = [&](NodeId from, ConvOp op, const std::string& label) {
    NodeId conv = g.add_node(op, Role::kBackbone, label);
    g.add_edge(from, conv);
    if (!cfg.activation) return conv;
    NodeId act = g.add_node(SiluOp{}, Role::kBackbone, label + ".silu");
    g.add_edge(conv, act);
    return act;
  };

  NodeId x = conv_stage(image, ConvOp{cfg.stem_channels.first, 3, 2, 1}, "stem1");
  x = conv_stage(x, ConvOp{cfg.stem_channels.second, 3, 2, 1}, "stem2");
  for (std::size_t i = 0; i < cfg.stage_channels.size(); ++i) {
    const int level = kS2DFirstLevel + static_cast<int>(i);
    const std::string name = "block" + std::to_string(i + 1);
    NodeId s2d = g.add_node(SpaceToDepthOp{2}, Role::kBackbone, name + ".s2d");
    g.add_edge(x, s2d);
    x = conv_stage(s2d, ConvOp{cfg.stage_channels[i], 1, 1, 0}, name + ".conv");
    g.mutable_node(x).level = level;
    g.add_output(x);
  }
  return g;
}

PyramidStubConfig default_stub_config() {
  PyramidStubConfig cfg;
  const S2DChainConfig chain;
  for (std::size_t i = 0; i < chain.stage_channels.size(); ++i)
    cfg.level_channels[kS2DFirstLevel + static_cast<int>(i)] = chain.stage_channels[i];
  return cfg;
}

ArchitectureGraph build_pyramid_stub(const PyramidStubConfig& cfg) {
  ArchitectureGraph g("pyramid-stub");
  g.metadata()["backbone"] = "stub";
  int prev = 0;
  bool first = true;
  for (const auto& [level, channels] : cfg.level_channels) {
    if (!first && level != prev + 1)
      fail_validation("pyramid stub levels must be contiguous (gap after P" +
                      std::to_string(prev) + ")");
    if (level < 0 || level > 30) fail_validation("pyramid level out of range");
    if (channels <= 0) fail_validation("pyramid stub widths must be positive");
    auto it = cfg.level_strides.find(level);
    const int stride = it == cfg.level_strides.end() ? (1 << level) : it->second;
    if (stride != (1 << level))
      fail_validation("stride of P" + std::to_string(level) + " must be 2^" +
                      std::to_string(level));
    NodeId id = g.add_node(SourceOp{channels, stride}, Role::kBackbone,
                           "P" + std::to_string(level), level);
    g.add_input(id);
    g.add_output(id);
    prev = level;
    first = false;
  }
  for (const auto& [level, stride] : cfg.level_strides)
    if (!cfg.level_channels.count(level))
      fail_validation("stride given for undeclared level P" + std::to_string(level));
  return g;
}

PyramidStubConfig parse_stub_spec(const std::string& spec) {
  PyramidStubConfig cfg;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      fail_usage("stub entry '" + item + "' must look like LEVEL=CHANNELS");
    std::string lhs = item.substr(0, eq);
    if (!lhs.empty() && (lhs[0] == 'P' || lhs[0] == 'p')) lhs.erase(0, 1);
    try {
      std::size_t a = 0, b = 0;
      const int level = std::stoi(lhs, &a);
      const int channels = std::stoi(item.substr(eq + 1), &b);
      if (a != lhs.size() || b != item.size() - eq - 1) throw std::invalid_argument(item);
      cfg.level_channels[level] = channels;
    } catch (const std::logic_error&) {
      fail_usage("stub entry '" + item + "' must look like LEVEL=CHANNELS");
    }
  }
  return cfg;
}

Pyramid pyramid_of(const ArchitectureGraph& backbone) {
  Pyramid p;
  for (NodeId id : backbone.outputs()) {
    const FeatureNode& n = backbone.node(id);
    if (!n.level) fail_validation("backbone output " + std::to_string(id.value) + " has no level");
    int channels = 0;
    if (const auto* s = std::get_if<SourceOp>(&n.op)) {
      channels = s->channels;
    } else {
      // Walk back through shape-preserving ops to the producing conv.
      NodeId cur = id;
      while (channels == 0) {
        const FeatureNode& c = backbone.node(cur);
        if (const auto* conv = std::get_if<ConvOp>(&c.op)) {
          channels = conv->out_channels;
        } else if (const auto* f = std::get_if<FusionOp>(&c.op)) {
          channels = f->out_channels;
        } else if (c.shape) {
          channels = c.shape->channels;
        } else {
          const auto ins = backbone.in_edges(cur);
          if (ins.size() != 1) fail_validation("cannot determine width of backbone output");
          cur = ins.front().src;
        }
      }
    }
    p.push_back({*n.level, channels});
  }
  std::sort(p.begin(), p.end(), [](auto& a, auto& b) { return a.level < b.level; });
  return p;
}

ArchitectureGraph compose(const ArchitectureGraph& backbone, const ArchitectureGraph& neck) {
  std::map<int, NodeId> taps;
  for (NodeId id : backbone.outputs()) taps[backbone.node(id).level.value()] = id;

  ArchitectureGraph g = backbone;
  g.set_name(backbone.name() + "+" + neck.name());
  g.set_outputs({});
  for (const auto& [k, v] : neck.metadata()) g.metadata()[k] = v;

  std::map<NodeId, NodeId> remap;
  for (const auto& n : neck.nodes()) {
    if (std::holds_alternative<SourceOp>(n.op)) {
      auto it = taps.find(n.level.value_or(-1));
      if (it == taps.end())
        fail_validation("backbone provides no output at P" + std::to_string(n.level.value_or(-1)));
      const auto& src = std::get<SourceOp>(n.op);
      const auto bp = pyramid_of(backbone);
      for (const auto& lvl : bp)
        if (lvl.level == *n.level && lvl.channels != src.channels)
          fail_validation("neck expects " + std::to_string(src.channels) + " channels at P" +
                          std::to_string(lvl.level) + ", backbone provides " +
                          std::to_string(lvl.channels));
      remap[n.id] = it->second;
      continue;
    }
    NodeId id = g.add_node(n.op, n.role, n.label, n.level, n.layer);
    g.mutable_node(id).shape = n.shape;
    remap[n.id] = id;
  }
  for (const auto& e : neck.edges()) g.add_edge(remap.at(e.src), remap.at(e.dst), e.transform);
  for (NodeId id : neck.outputs()) g.add_output(remap.at(id));
  return g;
}

}  // namespace giraffe
