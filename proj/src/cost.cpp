#include "giraffe/cost.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

namespace giraffe {
namespace {

using u64 = std::uint64_t;

const Shape& shape_or_throw(const ArchitectureGraph& g, NodeId id) {
  const auto& s = g.node(id).shape;
  if (!s) fail_validation("node " + std::to_string(id.value) + " has no inferred shape");
  return *s;
}

u64 spatial(const Shape& s) { return static_cast<u64>(s.height) * static_cast<u64>(s.width); }

// 1x1 projections carried on in-edges: (H*W*out) * in MACs each.
u64 projection_flops(const ArchitectureGraph& g, NodeId id) {
  u64 total = 0;
  for (const auto& e : g.in_edges(id)) {
    if (e.transform.kind != TransformKind::kProject) continue;
    const Shape out = apply_transform(e.transform, shape_or_throw(g, e.src));
    total += out.numel() * static_cast<u64>(shape_or_throw(g, e.src).channels);
  }
  return total;
}

u64 resample_edge_elements(const ArchitectureGraph& g, NodeId id) {
  u64 total = 0;
  for (const auto& e : g.in_edges(id))
    if (e.transform.kind == TransformKind::kUpsample2 ||
        e.transform.kind == TransformKind::kDownsample2)
      total += apply_transform(e.transform, shape_or_throw(g, e.src)).numel();
  return total;
}

}  // namespace

u64 flops_of(const ArchitectureGraph& g, NodeId id, CostMode mode) {
  const FeatureNode& n = g.node(id);
  const Shape& out = shape_or_throw(g, id);
  const bool strict = mode == CostMode::kStrict;
  u64 flops = projection_flops(g, id);
  if (strict) flops += resample_edge_elements(g, id);

  if (const auto* c = std::get_if<ConvOp>(&n.op)) {
    flops += out.numel() * static_cast<u64>(c->kernel) * c->kernel *
             static_cast<u64>(conv_input_channels(g, id));
    if (strict) flops += out.numel() * ((c->bias ? 1 : 0) + (c->activation ? 1 : 0));
  } else if (const auto* f = std::get_if<FusionOp>(&n.op)) {
    flops += out.numel() * static_cast<u64>(f->kernel) * f->kernel *
             static_cast<u64>(conv_input_channels(g, id));
    if (strict) {
      const u64 fan = g.in_edges(id).size();
      if (f->style == FusionStyle::kSum && fan > 1)
        flops += (fan - 1) * spatial(out) * static_cast<u64>(conv_input_channels(g, id));
      flops += out.numel() * ((f->bias ? 1 : 0) + (f->activation ? 1 : 0));
    }
  } else if (strict && (std::holds_alternative<SiluOp>(n.op) ||
                        std::holds_alternative<ResampleOp>(n.op))) {
    flops += out.numel();
  }
  return flops;
}

u64 params_of(const ArchitectureGraph& g, NodeId id) {
  const FeatureNode& n = g.node(id);
  u64 total = 0;
  for (const auto& e : g.in_edges(id))
    if (e.transform.kind == TransformKind::kProject) {
      const u64 in = static_cast<u64>(shape_or_throw(g, e.src).channels);
      const u64 out = static_cast<u64>(e.transform.out_channels);
      total += in * out + out;
    }
  auto conv_params = [&](int kernel, int out, bool bias) {
    const u64 in = static_cast<u64>(conv_input_channels(g, id));
    return static_cast<u64>(kernel) * kernel * in * static_cast<u64>(out) +
           (bias ? static_cast<u64>(out) : 0);
  };
  if (const auto* c = std::get_if<ConvOp>(&n.op)) total += conv_params(c->kernel, c->out_channels, c->bias);
  if (const auto* f = std::get_if<FusionOp>(&n.op)) total += conv_params(f->kernel, f->out_channels, f->bias);
  return total;
}

u64 param_count(const ArchitectureGraph& g) {
  u64 total = 0;
  for (const auto& n : g.nodes()) total += params_of(g, n.id);
  return total;
}

double to_gflops(u64 flops) {
  return std::floor(static_cast<double>(flops) / 1e7 + 0.5) / 100.0;
}

CostReport analyze(const ArchitectureGraph& graph, const Shape& input, CostMode mode) {
  const ArchitectureGraph g = infer_shapes(graph, input);
  CostReport r;
  r.graph = g.name();
  r.input = input;
  r.mode = mode;
  u64 cumulative = 0;
  for (NodeId id : toposort(g)) {
    const FeatureNode& n = g.node(id);
    CostRow row;
    row.id = id;
    row.label = n.label;
    row.role = n.role;
    row.shape = *n.shape;
    row.flops = flops_of(g, id, mode);
    row.params = params_of(g, id);
    if (const auto* c = std::get_if<ConvOp>(&n.op)) {
      row.kind = "Convolution Layer";
      row.filters = c->out_channels;
      row.filter = std::to_string(c->kernel) + " x " + std::to_string(c->kernel) + " x " +
                   std::to_string(conv_input_channels(g, id));
      row.stride = c->stride;
      row.padding = c->padding;
    } else if (const auto* f = std::get_if<FusionOp>(&n.op)) {
      row.kind = f->style == FusionStyle::kConcat ? "Fusion (concat)" : "Fusion (sum)";
      row.filters = f->out_channels;
      row.filter = std::to_string(f->kernel) + " x " + std::to_string(f->kernel) + " x " +
                   std::to_string(conv_input_channels(g, id));
      row.stride = 1;
      row.padding = f->kernel / 2;
    } else if (std::holds_alternative<InputOp>(n.op)) {
      row.kind = "Input Image";
    } else if (std::holds_alternative<SourceOp>(n.op)) {
      row.kind = "Pyramid Source";
    } else if (std::holds_alternative<SiluOp>(n.op)) {
      row.kind = "SiLU Layer";
    } else if (std::holds_alternative<SpaceToDepthOp>(n.op)) {
      row.kind = "Space-to-Depth";
    } else {
      row.kind = std::get<ResampleOp>(n.op).up ? "Upsample x2" : "Downsample x2";
    }
    cumulative += row.flops;
    row.cumulative = cumulative;
    if (n.role == Role::kBackbone) {
      r.backbone_flops += row.flops;
      r.backbone_params += row.params;
    } else {
      r.neck_flops += row.flops;
      r.neck_params += row.params;
    }
    r.rows.push_back(std::move(row));
  }
  r.total_flops = cumulative;
  r.total_params = r.backbone_params + r.neck_params;
  return r;
}

TopologyReport path_report(const ArchitectureGraph& g, NeckKind kind, int layers) {
  TopologyReport r;
  r.neck = to_string(kind);
  r.layers = layers;
  r.effective_depth = depth_accounting(kind, layers);

  std::map<NodeId, std::vector<NodeId>> succ_all;
  std::map<NodeId, std::vector<NodeId>> succ_same;
  std::map<int, std::vector<const FeatureNode*>> by_level;
  for (const auto& n : g.nodes())
    if (n.role == Role::kNeck) {
      ++r.node_count;
      if (n.level && n.layer) by_level[*n.level].push_back(&n);
    }
  for (const auto& e : g.edges()) {
    const FeatureNode& dst = g.node(e.dst);
    if (dst.role != Role::kNeck) continue;
    const FeatureNode& src = g.node(e.src);
    ++r.edge_count;
    ++r.edges_by_transform[transform_name(e.transform)];
    if (src.role != Role::kNeck) continue;
    succ_all[e.src].push_back(e.dst);
    if (src.level && dst.level && *src.level == *dst.level && src.layer && dst.layer) {
      succ_same[e.src].push_back(e.dst);
      ++r.same_level_edges;
      if (*dst.layer - *src.layer >= 2) ++r.skip_edges;
    }
  }

  auto bfs = [](NodeId from, std::map<NodeId, std::vector<NodeId>>& succ) {
    std::map<NodeId, int> dist{{from, 0}};
    std::deque<NodeId> q{from};
    while (!q.empty()) {
      NodeId cur = q.front();
      q.pop_front();
      for (NodeId s : succ[cur])
        if (!dist.count(s)) {
          dist[s] = dist[cur] + 1;
          q.push_back(s);
        }
    }
    return dist;
  };

  for (auto& [level, nodes] : by_level) {
    std::sort(nodes.begin(), nodes.end(), [](auto* a, auto* b) { return *a->layer < *b->layer; });
    LevelPaths lp;
    lp.level = level;
    const NodeId entry = nodes.front()->id;
    const auto same = bfs(entry, succ_same);
    const auto full = bfs(entry, succ_all);
    for (const FeatureNode* n : nodes) {
      auto s = same.find(n->id);
      auto f = full.find(n->id);
      lp.same_level[*n->layer] = s == same.end() ? -1 : s->second;
      lp.full_graph[*n->layer] = f == full.end() ? -1 : f->second;
      lp.max_same_level = std::max(lp.max_same_level, lp.same_level[*n->layer]);
      lp.max_full_graph = std::max(lp.max_full_graph, lp.full_graph[*n->layer]);
    }
    r.max_same_level = std::max(r.max_same_level, lp.max_same_level);
    r.max_full_graph = std::max(r.max_full_graph, lp.max_full_graph);
    r.levels.push_back(std::move(lp));
  }
  return r;
}

int match_width(const std::function<u64(int)>& flops_at_width, u64 target, int lo, int hi) {
  if (lo < 1 || hi < lo) fail_validation("invalid width search range");
  int a = lo;
  int b = hi;
  // First width whose cost reaches the target.
  while (a < b) {
    const int mid = a + (b - a) / 2;
    if (flops_at_width(mid) >= target) b = mid;
    else a = mid + 1;
  }
  if (a > lo) {
    const u64 above = flops_at_width(a);
    const u64 below = flops_at_width(a - 1);
    const u64 d_above = above >= target ? above - target : target - above;
    const u64 d_below = target - below;
    if (d_below <= d_above) return a - 1;
  }
  return a;
}

}  // namespace giraffe
