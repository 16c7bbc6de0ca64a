#include "giraffe/execute.hpp"

#include <cmath>
#include <mutex>
#include <set>
#include <thread>

#include "giraffe/ops.hpp"

namespace giraffe {

std::uint64_t SeededRng::next_u64() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SeededRng::next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

namespace {

template <typename T>
BasicConvWeights<T> draw_conv(SeededRng& rng, int out, int in, int k, bool bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in) * k * k);
  std::vector<T> v(static_cast<std::size_t>(out) * in * k * k);
  for (T& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  std::optional<std::vector<T>> b;
  if (bias) {
    b.emplace(static_cast<std::size_t>(out));
    for (T& x : *b) x = static_cast<T>(rng.uniform(-bound, bound));
  }
  return BasicConvWeights<T>(out, in, k, k, std::move(v), std::move(b));
}

const Shape& shape_of(const ArchitectureGraph& g, NodeId id) {
  const auto& s = g.node(id).shape;
  if (!s) fail_validation("shapes not inferred for node " + std::to_string(id.value));
  return *s;
}

// Evaluates one node given its raw (untransformed) inputs, in in-edge order.
// Backend supplies the primitive set; Value is a tensor or a tape variable.
template <typename Backend>
typename Backend::Value eval_node(Backend& be, const FeatureNode& n,
                                  const std::vector<GraphEdge>& ins,
                                  std::vector<typename Backend::Value> args,
                                  const typename Backend::Weights* w) {
  using Value = typename Backend::Value;
  for (std::size_t i = 0; i < ins.size(); ++i) {
    switch (ins[i].transform.kind) {
      case TransformKind::kIdentity: break;
      case TransformKind::kUpsample2: args[i] = be.up(args[i]); break;
      case TransformKind::kDownsample2: args[i] = be.down(args[i]); break;
      case TransformKind::kProject: {
        if (!w || i >= w->edge_projections.size() || !w->edge_projections[i])
          fail_validation("missing projection weights on edge into node " +
                          std::to_string(n.id.value));
        args[i] = be.conv(args[i], *w->edge_projections[i], ParamSlot{n.id, static_cast<int>(i)},
                          1, 0);
        break;
      }
    }
  }
  auto main_conv = [&]() -> const auto& {
    if (!w || !w->conv) fail_validation("missing weights for node " + std::to_string(n.id.value));
    return *w->conv;
  };

  if (std::holds_alternative<InputOp>(n.op) || std::holds_alternative<SourceOp>(n.op))
    fail_internal("source nodes are not evaluated");
  if (const auto* c = std::get_if<ConvOp>(&n.op)) {
    Value y = be.conv(args.front(), main_conv(), ParamSlot{n.id, -1}, c->stride, c->padding);
    return c->activation ? be.silu(y) : y;
  }
  if (std::holds_alternative<SiluOp>(n.op)) return be.silu(args.front());
  if (const auto* b = std::get_if<SpaceToDepthOp>(&n.op)) return be.s2d(args.front(), b->block);
  if (const auto* r = std::get_if<ResampleOp>(&n.op))
    return r->up ? be.up(args.front()) : be.down(args.front());
  const auto& f = std::get<FusionOp>(n.op);
  Value x = args.size() == 1 ? args.front()
            : f.style == FusionStyle::kConcat ? be.concat(args)
                                              : be.sum(args);
  Value y = be.conv(x, main_conv(), ParamSlot{n.id, -1}, 1, f.kernel / 2);
  return f.activation ? be.silu(y) : y;
}

template <typename T>
struct EagerBackend {
  using Value = BasicTensor<T>;
  using Weights = NodeWeights<T>;
  KernelOptions kernel;

  Value conv(const Value& x, const BasicConvWeights<T>& w, ParamSlot, int s, int p) {
    return conv2d(x, w, s, p, kernel);
  }
  Value silu(const Value& x) { return giraffe::silu(x); }
  Value s2d(const Value& x, int block) { return space_to_depth(x, block); }
  Value up(const Value& x) { return bilinear_up2(x); }
  Value down(const Value& x) { return maxpool_down2(x); }
  Value concat(const std::vector<Value>& xs) { return concat_channels<T>(xs); }
  Value sum(const std::vector<Value>& xs) { return sum_tensors<T>(xs); }
};

template <typename T>
struct TapeBackend {
  using Value = VarId;
  using Weights = NodeWeights<T>;
  Tape<T>& tape;
  std::map<ParamSlot, ParamId>& params;

  Value conv(Value x, const BasicConvWeights<T>& w, ParamSlot slot, int s, int p) {
    auto it = params.find(slot);
    if (it == params.end()) it = params.emplace(slot, tape.param(w)).first;
    return tape.conv2d(x, it->second, s, p);
  }
  Value silu(Value x) { return tape.silu(x); }
  Value s2d(Value x, int block) { return tape.space_to_depth(x, block); }
  Value up(Value x) { return tape.bilinear_up2(x); }
  Value down(Value x) { return tape.maxpool_down2(x); }
  Value concat(const std::vector<Value>& xs) { return tape.concat(xs); }
  Value sum(const std::vector<Value>& xs) { return tape.sum(xs); }
};

bool is_source_node(const FeatureNode& n) {
  return std::holds_alternative<InputOp>(n.op) || std::holds_alternative<SourceOp>(n.op);
}

}  // namespace

template <typename T>
WeightTable<T> init_weights(const ArchitectureGraph& g, std::uint64_t seed) {
  SeededRng rng(seed);
  WeightTable<T> table;
  for (NodeId id : toposort(g)) {
    const FeatureNode& n = g.node(id);
    if (is_source_node(n)) continue;
    NodeWeights<T> w;
    const auto ins = g.in_edges(id);
    for (const auto& e : ins) {
      if (e.transform.kind == TransformKind::kProject) {
        w.edge_projections.push_back(
            draw_conv<T>(rng, e.transform.out_channels, shape_of(g, e.src).channels, 1, true));
      } else {
        w.edge_projections.emplace_back();
      }
    }
    if (const auto* c = std::get_if<ConvOp>(&n.op))
      w.conv = draw_conv<T>(rng, c->out_channels, conv_input_channels(g, id), c->kernel, c->bias);
    if (const auto* f = std::get_if<FusionOp>(&n.op))
      w.conv = draw_conv<T>(rng, f->out_channels, conv_input_channels(g, id), f->kernel, f->bias);
    table.emplace(id, std::move(w));
  }
  return table;
}

template <typename T>
std::map<NodeId, BasicTensor<T>> random_inputs(const ArchitectureGraph& g, std::uint64_t seed) {
  SeededRng rng(seed);
  std::map<NodeId, BasicTensor<T>> out;
  for (NodeId id : g.inputs()) {
    BasicTensor<T> t(shape_of(g, id));
    for (T& v : t.data()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    out.emplace(id, std::move(t));
  }
  return out;
}

template <typename T>
std::map<NodeId, BasicTensor<T>> execute(const ArchitectureGraph& g,
                                         const std::map<NodeId, BasicTensor<T>>& inputs,
                                         const WeightTable<T>& weights, ExecOptions opts) {
  const auto order = toposort(g);
  std::map<NodeId, BasicTensor<T>> values;
  for (NodeId id : g.inputs()) {
    auto it = inputs.find(id);
    if (it == inputs.end()) fail_validation("missing input tensor for node " + std::to_string(id.value));
    if (g.node(id).shape && it->second.shape() != *g.node(id).shape)
      fail_validation("input tensor for node " + std::to_string(id.value) + " has shape " +
                      to_string(it->second.shape()) + ", expected " +
                      to_string(*g.node(id).shape));
    values.emplace(id, it->second);
  }

  // Wavefront schedule: a node runs once all of its predecessors are done.
  std::map<NodeId, int> pending;
  for (NodeId id : order) pending[id] = 0;
  for (const auto& e : g.edges()) ++pending[e.dst];
  std::vector<NodeId> wave;
  for (NodeId id : order)
    if (pending[id] == 0 && !is_source_node(g.node(id)))
      fail_validation("node " + std::to_string(id.value) + " has no inputs");
  std::set<NodeId> done;
  for (NodeId id : g.inputs()) done.insert(id);
  for (const auto& e : g.edges())
    if (done.count(e.src)) --pending[e.dst];
  for (NodeId id : order)
    if (!done.count(id) && pending[id] == 0) wave.push_back(id);

  auto run = [&](NodeId id, unsigned kernel_threads) {
    const FeatureNode& n = g.node(id);
    const auto ins = g.in_edges(id);
    std::vector<BasicTensor<T>> args;
    args.reserve(ins.size());
    for (const auto& e : ins) args.push_back(values.at(e.src));
    auto wit = weights.find(id);
    EagerBackend<T> be{KernelOptions{kernel_threads}};
    auto out = eval_node(be, n, ins, std::move(args), wit == weights.end() ? nullptr : &wit->second);
    if (n.shape && out.shape() != *n.shape)
      fail_internal("runtime shape " + to_string(out.shape()) + " at node " +
                    std::to_string(id.value) + " disagrees with inferred " + to_string(*n.shape));
    return out;
  };

  const unsigned threads = std::max(1u, opts.threads);
  while (!wave.empty()) {
    std::vector<std::optional<BasicTensor<T>>> results(wave.size());
    if (threads == 1 || wave.size() == 1) {
      for (std::size_t i = 0; i < wave.size(); ++i) results[i] = run(wave[i], threads);
    } else {
      std::exception_ptr error;
      std::mutex error_mu;
      std::vector<std::jthread> pool;
      const std::size_t workers = std::min<std::size_t>(threads, wave.size());
      for (std::size_t t = 0; t < workers; ++t)
        pool.emplace_back([&, t] {
          for (std::size_t i = t; i < wave.size(); i += workers) {
            try {
              results[i] = run(wave[i], 1);
            } catch (...) {
              std::lock_guard lock(error_mu);
              if (!error) error = std::current_exception();
            }
          }
        });
      pool.clear();
      if (error) std::rethrow_exception(error);
    }
    std::vector<NodeId> next;
    for (std::size_t i = 0; i < wave.size(); ++i) {
      values.emplace(wave[i], std::move(*results[i]));
      done.insert(wave[i]);
      for (const auto& e : g.out_edges(wave[i]))
        if (--pending[e.dst] == 0) next.push_back(e.dst);
    }
    std::sort(next.begin(), next.end());
    wave = std::move(next);
  }
  if (values.size() != g.nodes().size()) fail_internal("execution did not reach every node");
  return values;
}

template <typename T>
TapeRun<T> execute_on_tape(const ArchitectureGraph& g, Tape<T>& tape,
                           const std::map<NodeId, VarId>& inputs, const WeightTable<T>& weights) {
  TapeRun<T> run;
  TapeBackend<T> be{tape, run.params};
  for (NodeId id : toposort(g)) {
    const FeatureNode& n = g.node(id);
    if (is_source_node(n)) {
      auto it = inputs.find(id);
      if (it == inputs.end())
        fail_validation("missing input variable for node " + std::to_string(id.value));
      run.values.emplace(id, it->second);
      continue;
    }
    const auto ins = g.in_edges(id);
    std::vector<VarId> args;
    for (const auto& e : ins) args.push_back(run.values.at(e.src));
    auto wit = weights.find(id);
    run.values.emplace(id, eval_node(be, n, ins, std::move(args),
                                     wit == weights.end() ? nullptr : &wit->second));
  }
  return run;
}

template <typename T>
std::uint64_t checksum(const BasicTensor<T>& t) {
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(static_cast<std::uint64_t>(t.shape().height) * 0x9E3779B97F4A7C15ULL ^
                        static_cast<std::uint64_t>(t.shape().width) << 20 ^
                        static_cast<std::uint64_t>(t.shape().channels) << 40);
  const auto d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto q = static_cast<std::int64_t>(std::llround(static_cast<double>(d[i]) * 1e6));
    h += mix(mix(static_cast<std::uint64_t>(i) + 0x9E3779B97F4A7C15ULL) ^
             static_cast<std::uint64_t>(q));
  }
  return h;
}

#define GIRAFFE_INSTANTIATE_EXEC(T)                                                               \
  template WeightTable<T> init_weights<T>(const ArchitectureGraph&, std::uint64_t);              \
  template std::map<NodeId, BasicTensor<T>> random_inputs<T>(const ArchitectureGraph&,           \
                                                             std::uint64_t);                     \
  template std::map<NodeId, BasicTensor<T>> execute<T>(                                          \
      const ArchitectureGraph&, const std::map<NodeId, BasicTensor<T>>&, const WeightTable<T>&,  \
      ExecOptions);                                                                              \
  template TapeRun<T> execute_on_tape<T>(const ArchitectureGraph&, Tape<T>&,                     \
                                         const std::map<NodeId, VarId>&, const WeightTable<T>&); \
  template std::uint64_t checksum<T>(const BasicTensor<T>&);

GIRAFFE_INSTANTIATE_EXEC(float)
GIRAFFE_INSTANTIATE_EXEC(double)

#undef GIRAFFE_INSTANTIATE_EXEC

}  // namespace giraffe
