#include "giraffe/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "giraffe/backbone.hpp"
#include "giraffe/execute.hpp"
#include "giraffe/neck.hpp"
#include "giraffe/ops.hpp"

namespace giraffe {

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](auto& e) { return e.passed; });
}

double GradcheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

namespace {

TensorD random_tensor(SeededRng& rng, Shape s) {
  TensorD t(s);
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

ConvWeightsD random_weights(SeededRng& rng, int out, int in, int k) {
  std::vector<double> v(static_cast<std::size_t>(out) * in * k * k);
  for (double& x : v) x = rng.uniform(-0.5, 0.5);
  std::vector<double> b(static_cast<std::size_t>(out));
  for (double& x : b) x = rng.uniform(-0.5, 0.5);
  return ConvWeightsD(out, in, k, k, std::move(v), std::move(b));
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

struct Evaluation {
  Tape<double> tape;
  std::vector<VarId> leaves;
  std::vector<ParamId> params;
  std::vector<VarId> outputs;
};

Evaluation run_forward(const GradProblem& p, const std::vector<TensorD>& tensors,
                       const std::vector<ConvWeightsD>& params) {
  Evaluation ev;
  for (const auto& t : tensors) ev.leaves.push_back(ev.tape.input(t, true));
  ev.outputs = p.forward(ev.tape, ev.leaves, params, ev.params);
  if (ev.params.size() != params.size())
    fail_internal("gradcheck problem '" + p.name + "' registered the wrong number of weight blocks");
  return ev;
}

double loss_of(const Evaluation& ev, const std::vector<TensorD>& seeds) {
  double loss = 0.0;
  for (std::size_t o = 0; o < ev.outputs.size(); ++o) {
    const auto out = ev.tape.value(ev.outputs[o]).data();
    const auto r = seeds[o].data();
    for (std::size_t i = 0; i < out.size(); ++i) loss += r[i] * out[i];
  }
  return loss;
}

double rel_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

std::vector<GradcheckEntry> check_problem(const GradProblem& p, const GradcheckOptions& opts) {
  SeededRng rng(opts.seed ^ name_hash(p.name));
  Evaluation base = run_forward(p, p.tensors, p.params);
  std::vector<TensorD> seeds;
  std::vector<std::pair<VarId, TensorD>> seed_pairs;
  for (VarId out : base.outputs) {
    seeds.push_back(random_tensor(rng, base.tape.value(out).shape()));
    seed_pairs.emplace_back(out, seeds.back());
  }
  const Gradients<double> grads = backward(base.tape, seed_pairs);
  const double scale = 1.0 + opts.fault;

  std::vector<TensorD> tensors = p.tensors;
  std::vector<ConvWeightsD> params = p.params;
  auto numeric = [&](double& slot) {
    const double saved = slot;
    slot = saved + opts.step;
    const double plus = loss_of(run_forward(p, tensors, params), seeds);
    slot = saved - opts.step;
    const double minus = loss_of(run_forward(p, tensors, params), seeds);
    slot = saved;
    return (plus - minus) / (2.0 * opts.step);
  };

  std::vector<GradcheckEntry> entries;
  auto finish = [&](GradcheckEntry e) {
    e.passed = e.max_rel_error <= opts.tolerance;
    entries.push_back(std::move(e));
  };

  for (std::size_t t = 0; t < tensors.size(); ++t) {
    GradcheckEntry e;
    e.name = p.name + "/" + (t < p.tensor_names.size() ? p.tensor_names[t] : "input" + std::to_string(t));
    const auto analytic = grads.inputs.at(base.leaves[t]).data();
    auto values = tensors[t].data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double n = numeric(values[i]);
      e.max_rel_error = std::max(e.max_rel_error, rel_error(analytic[i] * scale, n, opts.magnitude_floor));
      ++e.checked;
    }
    finish(std::move(e));
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    GradcheckEntry e;
    e.name = p.name + "/" + (b < p.param_names.size() ? p.param_names[b] : "weights" + std::to_string(b));
    const ConvWeightsD& analytic = grads.params.at(base.params[b]);
    for (std::size_t i = 0; i < params[b].values.size(); ++i) {
      const double n = numeric(params[b].values[i]);
      e.max_rel_error =
          std::max(e.max_rel_error, rel_error(analytic.values[i] * scale, n, opts.magnitude_floor));
      ++e.checked;
    }
    if (params[b].bias) {
      for (std::size_t i = 0; i < params[b].bias->size(); ++i) {
        const double n = numeric((*params[b].bias)[i]);
        e.max_rel_error =
            std::max(e.max_rel_error, rel_error((*analytic.bias)[i] * scale, n, opts.magnitude_floor));
        ++e.checked;
      }
    }
    finish(std::move(e));
  }
  return entries;
}

GradcheckReport gradcheck_primitives(const GradcheckOptions& opts) {
  SeededRng rng(opts.seed);
  std::vector<GradProblem> problems;

  auto unary = [&](std::string name, Shape s, std::function<VarId(Tape<double>&, VarId)> op) {
    GradProblem p;
    p.name = std::move(name);
    p.tensors = {random_tensor(rng, s)};
    p.tensor_names = {"input"};
    p.forward = [op](Tape<double>& tape, const std::vector<VarId>& xs,
                     const std::vector<ConvWeightsD>&, std::vector<ParamId>&) {
      return std::vector<VarId>{op(tape, xs[0])};
    };
    problems.push_back(std::move(p));
  };

  auto conv = [&](std::string name, Shape s, int out, int k, int stride, int pad) {
    GradProblem p;
    p.name = std::move(name);
    p.tensors = {random_tensor(rng, s)};
    p.tensor_names = {"input"};
    p.params = {random_weights(rng, out, s.channels, k)};
    p.param_names = {"weights"};
    p.forward = [stride, pad](Tape<double>& tape, const std::vector<VarId>& xs,
                              const std::vector<ConvWeightsD>& ws, std::vector<ParamId>& ids) {
      ids.push_back(tape.param(ws[0]));
      return std::vector<VarId>{tape.conv2d(xs[0], ids[0], stride, pad)};
    };
    problems.push_back(std::move(p));
  };

  conv("conv2d", {8, 8, 3}, 4, 3, 2, 1);
  conv("conv2d_s1", {6, 6, 2}, 3, 3, 1, 1);
  conv("conv1x1", {8, 8, 4}, 3, 1, 1, 0);
  unary("silu", {8, 8, 4}, [](Tape<double>& t, VarId x) { return t.silu(x); });
  unary("space_to_depth", {8, 8, 4}, [](Tape<double>& t, VarId x) { return t.space_to_depth(x, 2); });
  unary("bilinear_up2", {4, 4, 4}, [](Tape<double>& t, VarId x) { return t.bilinear_up2(x); });
  unary("maxpool_down2", {8, 8, 4}, [](Tape<double>& t, VarId x) { return t.maxpool_down2(x); });

  for (const char* name : {"concat_channels", "sum_tensors"}) {
    GradProblem p;
    p.name = name;
    const bool concat = std::string(name) == "concat_channels";
    p.tensors = {random_tensor(rng, {4, 4, concat ? 1 : 3}), random_tensor(rng, {4, 4, concat ? 2 : 3}),
                 random_tensor(rng, {4, 4, 3})};
    p.tensor_names = {"a", "b", "c"};
    p.forward = [concat](Tape<double>& tape, const std::vector<VarId>& xs,
                         const std::vector<ConvWeightsD>&, std::vector<ParamId>&) {
      return std::vector<VarId>{concat ? tape.concat(xs) : tape.sum(xs)};
    };
    problems.push_back(std::move(p));
  }

  GradcheckReport report;
  report.suite = "primitives";
  report.tolerance = opts.tolerance;
  for (const auto& p : problems)
    for (auto& e : check_problem(p, opts)) report.entries.push_back(std::move(e));
  return report;
}

GradcheckReport gradcheck_graph(const ArchitectureGraph& g, const GradcheckOptions& opts) {
  const auto inputs = random_inputs<double>(g, opts.seed);
  const auto table = init_weights<double>(g, opts.seed + 1);

  GradProblem p;
  p.name = g.name();
  std::vector<NodeId> input_ids;
  for (const auto& [id, t] : inputs) {
    input_ids.push_back(id);
    p.tensors.push_back(t);
    const FeatureNode& n = g.node(id);
    p.tensor_names.push_back(n.label.empty() ? "input" + std::to_string(id.value) : n.label);
  }
  std::vector<ParamSlot> slots;
  for (const auto& [id, w] : table) {
    const FeatureNode& n = g.node(id);
    const std::string base = n.level && n.layer ? "P" + std::to_string(*n.level) + "^" +
                                                      std::to_string(*n.layer)
                                                : (n.label.empty() ? "node" + std::to_string(id.value) : n.label);
    for (std::size_t e = 0; e < w.edge_projections.size(); ++e)
      if (w.edge_projections[e]) {
        slots.push_back({id, static_cast<int>(e)});
        p.params.push_back(*w.edge_projections[e]);
        p.param_names.push_back(base + ".proj" + std::to_string(e));
      }
    if (w.conv) {
      slots.push_back({id, -1});
      p.params.push_back(*w.conv);
      p.param_names.push_back(base + ".conv");
    }
  }

  p.forward = [&g, input_ids, slots, table](Tape<double>& tape, const std::vector<VarId>& xs,
                                            const std::vector<ConvWeightsD>& ws,
                                            std::vector<ParamId>& ids) {
    WeightTable<double> local = table;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      auto& nw = local.at(slots[i].node);
      if (slots[i].edge < 0) nw.conv = ws[i];
      else nw.edge_projections[static_cast<std::size_t>(slots[i].edge)] = ws[i];
    }
    std::map<NodeId, VarId> in;
    for (std::size_t i = 0; i < input_ids.size(); ++i) in[input_ids[i]] = xs[i];
    const TapeRun<double> run = execute_on_tape(g, tape, in, local);
    for (const ParamSlot& s : slots) ids.push_back(run.params.at(s));
    std::vector<VarId> outs;
    for (NodeId o : g.outputs()) outs.push_back(run.values.at(o));
    return outs;
  };

  GradcheckReport report;
  report.suite = g.name();
  report.tolerance = opts.tolerance;
  report.entries = check_problem(p, opts);
  return report;
}

ArchitectureGraph tiny_gfpn() {
  PyramidStubConfig stub;
  stub.level_channels = {{3, 2}, {4, 3}};
  GfpnConfig cfg;
  cfg.depth = 2;
  cfg.width = 4;
  cfg.levels = {3, 4};
  cfg.skip_mode = SkipMode::kLog2n;
  const ArchitectureGraph backbone = build_pyramid_stub(stub);
  ArchitectureGraph g = compose(backbone, build_gfpn(cfg, pyramid_of(backbone)));
  g.set_name("tiny-gfpn");
  // P3 at stride 8 -> 8x8 feature map.
  return infer_shapes(g, Shape{64, 64, 3});
}

}  // namespace giraffe
