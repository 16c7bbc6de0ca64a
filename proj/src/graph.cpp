#include "giraffe/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>

#include "giraffe/ops.hpp"

namespace giraffe {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string describe(const FeatureNode& n) {
  std::ostringstream os;
  os << "node " << n.id.value;
  if (n.level && n.layer) os << " (P" << *n.level << "^" << *n.layer << ")";
  else if (!n.label.empty()) os << " (" << n.label << ")";
  return os.str();
}

bool is_source(const NodeOp& op) {
  return std::holds_alternative<InputOp>(op) || std::holds_alternative<SourceOp>(op);
}

}  // namespace

std::string op_kind_name(const NodeOp& op) {
  return std::visit(Overloaded{
                        [](const InputOp&) { return std::string("input"); },
                        [](const SourceOp&) { return std::string("source"); },
                        [](const ConvOp&) { return std::string("conv"); },
                        [](const SiluOp&) { return std::string("silu"); },
                        [](const SpaceToDepthOp&) { return std::string("space_to_depth"); },
                        [](const ResampleOp& r) {
                          return std::string(r.up ? "upsample2" : "downsample2");
                        },
                        [](const FusionOp&) { return std::string("fusion"); },
                    },
                    op);
}

std::string transform_name(const EdgeTransform& t) {
  switch (t.kind) {
    case TransformKind::kIdentity: return "identity";
    case TransformKind::kUpsample2: return "upsample2";
    case TransformKind::kDownsample2: return "downsample2";
    case TransformKind::kProject: return "project";
  }
  return "identity";
}

Shape apply_transform(const EdgeTransform& t, const Shape& s) {
  switch (t.kind) {
    case TransformKind::kIdentity: return s;
    case TransformKind::kUpsample2: return {s.height * 2, s.width * 2, s.channels};
    case TransformKind::kDownsample2:
      if (s.height % 2 != 0 || s.width % 2 != 0)
        fail_validation("downsample2 edge on odd extent " + to_string(s));
      return {s.height / 2, s.width / 2, s.channels};
    case TransformKind::kProject:
      if (t.out_channels <= 0) fail_validation("project edge needs positive out_channels");
      return {s.height, s.width, t.out_channels};
  }
  return s;
}

// ArchitectureGraph ------------------------------------------------------------

NodeId ArchitectureGraph::add_node(NodeOp op, Role role, std::string label,
                                   std::optional<int> level, std::optional<int> layer) {
  const int next = index_.empty() ? 0 : index_.rbegin()->first + 1;
  FeatureNode n;
  n.id = NodeId{next};
  n.level = level;
  n.layer = layer;
  n.role = role;
  n.label = std::move(label);
  n.op = std::move(op);
  insert_node(std::move(n));
  return NodeId{next};
}

void ArchitectureGraph::insert_node(FeatureNode node) {
  if (node.id.value < 0) fail_validation("node ids must be non-negative");
  if (index_.count(node.id.value))
    fail_validation("duplicate node id " + std::to_string(node.id.value));
  index_[node.id.value] = nodes_.size();
  nodes_.push_back(std::move(node));
}

void ArchitectureGraph::add_edge(NodeId src, NodeId dst, EdgeTransform transform) {
  if (!contains(src) || !contains(dst))
    fail_validation("edge " + std::to_string(src.value) + "->" + std::to_string(dst.value) +
                    " references an unknown node");
  edges_.push_back({src, dst, transform});
}

bool ArchitectureGraph::contains(NodeId id) const { return index_.count(id.value) != 0; }

std::size_t ArchitectureGraph::slot(NodeId id) const {
  auto it = index_.find(id.value);
  if (it == index_.end()) fail_validation("unknown node id " + std::to_string(id.value));
  return it->second;
}

const FeatureNode& ArchitectureGraph::node(NodeId id) const { return nodes_[slot(id)]; }
FeatureNode& ArchitectureGraph::mutable_node(NodeId id) { return nodes_[slot(id)]; }

std::vector<GraphEdge> ArchitectureGraph::in_edges(NodeId id) const {
  std::vector<GraphEdge> out;
  for (const auto& e : edges_)
    if (e.dst == id) out.push_back(e);
  return out;
}

std::vector<GraphEdge> ArchitectureGraph::out_edges(NodeId id) const {
  std::vector<GraphEdge> out;
  for (const auto& e : edges_)
    if (e.src == id) out.push_back(e);
  return out;
}

std::optional<NodeId> ArchitectureGraph::find(int level, int layer) const {
  for (const auto& n : nodes_)
    if (n.role == Role::kNeck && n.level == level && n.layer == layer) return n.id;
  return std::nullopt;
}

std::map<NodeId, NodeId> ArchitectureGraph::merge(const ArchitectureGraph& other) {
  std::map<NodeId, NodeId> remap;
  for (const auto& n : other.nodes_) {
    NodeId id = add_node(n.op, n.role, n.label, n.level, n.layer);
    mutable_node(id).shape = n.shape;
    remap[n.id] = id;
  }
  for (const auto& e : other.edges_) add_edge(remap.at(e.src), remap.at(e.dst), e.transform);
  return remap;
}

// Algorithms -------------------------------------------------------------------

std::vector<NodeId> toposort(const ArchitectureGraph& g) {
  std::map<NodeId, int> indegree;
  std::map<NodeId, std::vector<NodeId>> succ;
  for (const auto& n : g.nodes()) indegree[n.id] = 0;
  for (const auto& e : g.edges()) {
    ++indegree[e.dst];
    succ[e.src].push_back(e.dst);
  }
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& [id, d] : indegree)
    if (d == 0) ready.push(id);

  std::vector<NodeId> order;
  order.reserve(g.nodes().size());
  while (!ready.empty()) {
    NodeId id = ready.top();
    ready.pop();
    order.push_back(id);
    for (NodeId s : succ[id])
      if (--indegree[s] == 0) ready.push(s);
  }
  if (order.size() == g.nodes().size()) return order;

  // Strip nodes that only lead out of the cycle, leaving the cyclic core.
  std::set<NodeId> remaining;
  for (const auto& [id, d] : indegree)
    if (d > 0) remaining.insert(id);
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = remaining.begin(); it != remaining.end();) {
      bool has_out = false;
      for (NodeId s : succ[*it]) has_out = has_out || remaining.count(s);
      if (!has_out) {
        it = remaining.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
  }
  std::vector<NodeId> cyc(remaining.begin(), remaining.end());
  std::ostringstream os;
  os << "cycle detected among nodes {";
  for (std::size_t i = 0; i < cyc.size(); ++i) os << (i ? "," : "") << cyc[i].value;
  os << "}";
  throw CycleError(os.str(), std::move(cyc));
}

void validate(const ArchitectureGraph& g) {
  std::set<NodeId> input_set(g.inputs().begin(), g.inputs().end());
  for (NodeId id : g.inputs()) {
    if (!g.contains(id)) fail_validation("input " + std::to_string(id.value) + " is not a node");
    if (!is_source(g.node(id).op))
      fail_validation(describe(g.node(id)) + " is listed as an input but is not a source");
  }
  for (NodeId id : g.outputs())
    if (!g.contains(id)) fail_validation("output " + std::to_string(id.value) + " is not a node");

  std::map<NodeId, int> arity;
  for (const auto& e : g.edges()) ++arity[e.dst];
  std::set<std::pair<int, int>> keys;
  for (const auto& n : g.nodes()) {
    const int a = arity[n.id];
    if (is_source(n.op)) {
      if (a != 0) fail_validation(describe(n) + " is a source but has in-edges");
      if (!input_set.count(n.id)) fail_validation(describe(n) + " is a source but not an input");
    } else if (std::holds_alternative<FusionOp>(n.op)) {
      if (a < 1) fail_validation(describe(n) + " is a fusion without inputs");
    } else if (a != 1) {
      fail_validation(describe(n) + " (" + op_kind_name(n.op) + ") needs exactly one in-edge, has " +
                      std::to_string(a));
    }
    if (n.role == Role::kNeck && n.level && n.layer &&
        !keys.insert({*n.level, *n.layer}).second)
      fail_validation("duplicate neck key P" + std::to_string(*n.level) + "^" +
                      std::to_string(*n.layer));
  }

  toposort(g);

  std::set<NodeId> seen(input_set);
  std::vector<NodeId> stack(input_set.begin(), input_set.end());
  std::map<NodeId, std::vector<NodeId>> succ;
  for (const auto& e : g.edges()) succ[e.src].push_back(e.dst);
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    for (NodeId s : succ[id])
      if (seen.insert(s).second) stack.push_back(s);
  }
  for (const auto& n : g.nodes())
    if (!seen.count(n.id)) fail_validation(describe(n) + " is unreachable from the inputs");
}

namespace {

int transform_stride(const EdgeTransform& t, int stride, const FeatureNode& dst) {
  switch (t.kind) {
    case TransformKind::kUpsample2:
      if (stride % 2 != 0)
        fail_validation("upsample into " + describe(dst) + " would go below stride 1");
      return stride / 2;
    case TransformKind::kDownsample2: return stride * 2;
    default: return stride;
  }
}

}  // namespace

int max_stride(const ArchitectureGraph& g) {
  std::map<NodeId, int> stride;
  int best = 1;
  for (NodeId id : toposort(g)) {
    const FeatureNode& n = g.node(id);
    int s = 1;
    if (const auto* src = std::get_if<SourceOp>(&n.op)) {
      s = src->stride;
    } else if (!std::holds_alternative<InputOp>(n.op)) {
      const auto ins = g.in_edges(id);
      if (ins.empty()) fail_validation(describe(n) + " has no inputs");
      s = transform_stride(ins.front().transform, stride.at(ins.front().src), n);
      for (const auto& e : ins)
        if (transform_stride(e.transform, stride.at(e.src), n) != s)
          fail_validation(describe(n) + " fuses inputs of different strides");
      if (const auto* c = std::get_if<ConvOp>(&n.op)) s *= c->stride;
      if (const auto* b = std::get_if<SpaceToDepthOp>(&n.op)) s *= b->block;
      if (const auto* r = std::get_if<ResampleOp>(&n.op)) {
        if (r->up) {
          if (s % 2 != 0) fail_validation(describe(n) + " would go below stride 1");
          s /= 2;
        } else {
          s *= 2;
        }
      }
    }
    stride[id] = s;
    best = std::max(best, s);
  }
  return best;
}

ArchitectureGraph infer_shapes(const ArchitectureGraph& g, const Shape& input_shape) {
  if (input_shape.height <= 0 || input_shape.width <= 0 || input_shape.channels <= 0)
    fail_validation("input shape " + to_string(input_shape) + " must be positive");
  const int stride = max_stride(g);
  if (input_shape.height % stride != 0 || input_shape.width % stride != 0)
    fail_validation("input " + std::to_string(input_shape.height) + "x" +
                    std::to_string(input_shape.width) + " is not divisible by " +
                    std::to_string(stride));

  ArchitectureGraph out = g;
  for (NodeId id : toposort(g)) {
    FeatureNode& n = out.mutable_node(id);
    std::vector<Shape> ins;
    for (const auto& e : out.in_edges(id))
      ins.push_back(apply_transform(e.transform, out.node(e.src).shape.value()));

    auto single = [&]() -> const Shape& {
      if (ins.size() != 1) fail_validation(describe(n) + " needs exactly one input");
      return ins.front();
    };

    Shape s = std::visit(
        Overloaded{
            [&](const InputOp&) { return input_shape; },
            [&](const SourceOp& src) {
              if (src.stride <= 0 || src.channels <= 0)
                fail_validation(describe(n) + " declares a non-positive stride or width");
              return Shape{input_shape.height / src.stride, input_shape.width / src.stride,
                           src.channels};
            },
            [&](const ConvOp& c) {
              const Shape& x = single();
              const int h = conv_output_dim(x.height, c.kernel, c.stride, c.padding);
              const int w = conv_output_dim(x.width, c.kernel, c.stride, c.padding);
              if (h < 1 || w < 1 || c.out_channels <= 0)
                fail_validation(describe(n) + " yields a non-positive output extent");
              return Shape{h, w, c.out_channels};
            },
            [&](const SiluOp&) { return single(); },
            [&](const SpaceToDepthOp& b) {
              const Shape& x = single();
              if (x.height % b.block != 0 || x.width % b.block != 0)
                fail_validation(describe(n) + ": " + to_string(x) + " not divisible by block");
              return Shape{x.height / b.block, x.width / b.block, x.channels * b.block * b.block};
            },
            [&](const ResampleOp& r) {
              return apply_transform(r.up ? EdgeTransform::up() : EdgeTransform::down(), single());
            },
            [&](const FusionOp& f) {
              if (ins.empty()) fail_validation(describe(n) + " has no inputs");
              for (const Shape& x : ins) {
                const bool ok = f.style == FusionStyle::kConcat ? x.spatially_equal(ins.front())
                                                                 : x == ins.front();
                if (!ok)
                  fail_validation("shape conflict at " + describe(n) + ": " + to_string(x) +
                                  " vs " + to_string(ins.front()));
              }
              if (f.out_channels <= 0) fail_validation(describe(n) + " has no output width");
              return Shape{ins.front().height, ins.front().width, f.out_channels};
            },
        },
        n.op);
    n.shape = s;
  }
  return out;
}

int conv_input_channels(const ArchitectureGraph& g, NodeId id) {
  const FeatureNode& n = g.node(id);
  const auto ins = g.in_edges(id);
  if (ins.empty()) fail_validation(describe(n) + " has no inputs");
  auto channels_of = [&](const GraphEdge& e) {
    const auto& s = g.node(e.src).shape;
    if (!s) fail_validation("shapes not inferred for " + describe(g.node(e.src)));
    return apply_transform(e.transform, *s).channels;
  };
  if (const auto* f = std::get_if<FusionOp>(&n.op)) {
    if (f->style == FusionStyle::kSum) return channels_of(ins.front());
    int total = 0;
    for (const auto& e : ins) total += channels_of(e);
    return total;
  }
  return channels_of(ins.front());
}

}  // namespace giraffe
