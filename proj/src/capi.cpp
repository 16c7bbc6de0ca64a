#include "giraffe/giraffe_c.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <sstream>
#include <string>

#include "giraffe/backbone.hpp"
#include "giraffe/cost.hpp"
#include "giraffe/gradcheck.hpp"
#include "giraffe/graph_io.hpp"
#include "giraffe/model.hpp"
#include "giraffe/report.hpp"

struct gd_graph {
  giraffe::ArchitectureGraph graph;
};

namespace {

thread_local std::string last_error;

gd_status status_of(giraffe::ErrorKind k) {
  switch (k) {
    case giraffe::ErrorKind::kUsage:
      return GD_ERR_USAGE;
    case giraffe::ErrorKind::kValidation:
      return GD_ERR_VALIDATION;
    case giraffe::ErrorKind::kInternal:
      break;
  }
  return GD_ERR_INTERNAL;
}

template <typename F>
gd_status guarded(F&& f) {
  last_error.clear();
  try {
    f();
    return GD_OK;
  } catch (const giraffe::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    last_error = std::string("invalid JSON: ") + e.what();
    return GD_ERR_VALIDATION;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return GD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return GD_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return GD_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void require(const void* p, const char* what) {
  if (!p) giraffe::fail_usage(std::string(what) + " must not be null");
}

std::string or_default(const char* s, const char* fallback) { return s ? s : fallback; }

giraffe::GradcheckOptions to_options(const gd_gradcheck_options* o) {
  giraffe::GradcheckOptions opts;
  if (!o) return opts;
  opts.seed = o->seed;
  if (o->tolerance > 0) opts.tolerance = o->tolerance;
  if (o->step > 0) opts.step = o->step;
  opts.fault = o->fault;
  return opts;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

extern "C" {

const char* gd_last_error(void) { return last_error.c_str(); }

void gd_string_free(char* s) { std::free(s); }

const char* gd_version(void) { return "1.0.0"; }

void gd_build_options_init(gd_build_options* o) {
  if (!o) return;
  *o = gd_build_options{};
}

gd_status gd_graph_build(const gd_build_options* o, gd_graph** out) {
  return guarded([&] {
    require(o, "options");
    require(out, "out");
    giraffe::ModelSpec spec;
    if (o->model) spec.model = o->model;
    if (o->depth != 0) spec.depth = o->depth;
    if (o->width != 0) spec.width = o->width;
    if (o->neck) spec.neck = o->neck;
    if (o->skip) spec.skip_mode = giraffe::parse_skip_mode(o->skip);
    if (o->cross) spec.cross_scale = giraffe::parse_cross_scale(o->cross);
    if (o->style) spec.fusion_style = giraffe::parse_fusion_style(o->style);
    if (o->order) spec.within_layer_order = giraffe::parse_layer_order(o->order);
    if (o->level_min != 0) spec.levels.min = o->level_min;
    if (o->level_max != 0) spec.levels.max = o->level_max;
    if (o->backbone) spec.backbone = o->backbone;
    *out = new gd_graph{giraffe::build_model(spec)};
  });
}

gd_status gd_graph_from_json(const char* text, gd_graph** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    giraffe::ArchitectureGraph g = giraffe::deserialize(text);
    giraffe::validate(g);
    *out = new gd_graph{std::move(g)};
  });
}

gd_status gd_graph_to_json(const gd_graph* g, char** out) {
  return guarded([&] {
    require(g, "graph");
    require(out, "out");
    *out = dup_string(giraffe::serialize(g->graph) + "\n");
  });
}

gd_status gd_graph_to_dot(const gd_graph* g, char** out) {
  return guarded([&] {
    require(g, "graph");
    require(out, "out");
    *out = dup_string(giraffe::to_dot(g->graph));
  });
}

size_t gd_graph_node_count(const gd_graph* g) { return g ? g->graph.nodes().size() : 0; }

size_t gd_graph_edge_count(const gd_graph* g) { return g ? g->graph.edges().size() : 0; }

void gd_graph_free(gd_graph* g) { delete g; }

gd_status gd_analyze(const gd_graph* g, const char* input_shape, const char* format, int strict, char** out) {
  return guarded([&] {
    require(g, "graph");
    require(out, "out");
    const auto fmt = giraffe::parse_report_format(or_default(format, "table"));
    const giraffe::Shape input = giraffe::parse_input_spec(or_default(input_shape, "1280x768x3"));
    const auto r = giraffe::analyze(g->graph, input, strict ? giraffe::CostMode::kStrict : giraffe::CostMode::kMac);
    *out = dup_string(giraffe::format_cost(r, fmt));
  });
}

gd_status gd_forward(const gd_graph* g, const char* input_shape, uint64_t seed, unsigned threads, const char* format,
                     char** out) {
  return guarded([&] {
    require(g, "graph");
    require(out, "out");
    const auto fmt = giraffe::parse_report_format(or_default(format, "table"));
    const giraffe::Shape input = giraffe::parse_input_spec(or_default(input_shape, "random"));
    const auto s = giraffe::run_forward(g->graph, input, seed, threads == 0 ? 1 : threads);
    *out = dup_string(giraffe::format_forward(s, fmt));
  });
}

void gd_gradcheck_options_init(gd_gradcheck_options* o) {
  if (!o) return;
  const giraffe::GradcheckOptions d;
  *o = gd_gradcheck_options{"all", d.seed, d.tolerance, d.step, d.fault};
}

gd_status gd_gradcheck(const gd_gradcheck_options* o, const char* format, char** out, int* passed) {
  return guarded([&] {
    require(out, "out");
    const auto fmt = giraffe::parse_report_format(or_default(format, "table"));
    const std::string suite = o && o->suite ? o->suite : "all";
    const auto opts = to_options(o);
    std::vector<giraffe::GradcheckReport> reports;
    if (suite == "primitives" || suite == "all") reports.push_back(giraffe::gradcheck_primitives(opts));
    if (suite == "tiny-gfpn" || suite == "all") reports.push_back(giraffe::gradcheck_graph(giraffe::tiny_gfpn(), opts));
    if (reports.empty()) giraffe::fail_usage("unknown gradcheck suite '" + suite + "' (expected primitives, tiny-gfpn or all)");
    bool ok = true;
    for (const auto& r : reports) ok = ok && r.passed();
    if (passed) *passed = ok ? 1 : 0;
    *out = dup_string(giraffe::format_gradcheck(reports, fmt));
  });
}

gd_status gd_gradcheck_graph(const gd_graph* g, const char* input_shape, const gd_gradcheck_options* o,
                             const char* format, char** out, int* passed) {
  return guarded([&] {
    require(g, "graph");
    require(out, "out");
    require(input_shape, "input_shape");
    const auto fmt = giraffe::parse_report_format(or_default(format, "table"));
    const auto shaped = giraffe::infer_shapes(g->graph, giraffe::parse_shape(input_shape));
    const auto r = giraffe::gradcheck_graph(shaped, to_options(o));
    if (passed) *passed = r.passed() ? 1 : 0;
    *out = dup_string(giraffe::format_gradcheck({r}, fmt));
  });
}

void gd_topo_options_init(gd_topo_options* o) {
  if (!o) return;
  *o = gd_topo_options{"gfpn-log2n", 1, 256, 3, 7, nullptr, "1280x768x3"};
}

gd_status gd_topo(const gd_topo_options* o, const char* format, char** out) {
  return guarded([&] {
    require(o, "options");
    require(out, "out");
    const auto fmt = giraffe::parse_report_format(or_default(format, "table"));
    giraffe::TopologyOptions opts;
    opts.necks = split_list(or_default(o->necks, "gfpn-log2n"));
    if (o->depth != 0) opts.depth = o->depth;
    if (o->width != 0) opts.width = o->width;
    if (o->level_min != 0) opts.levels.min = o->level_min;
    if (o->level_max != 0) opts.levels.max = o->level_max;
    if (o->match_flops) opts.match_flops = o->match_flops;
    if (o->input_shape) opts.input = giraffe::parse_shape(o->input_shape);
    *out = dup_string(giraffe::format_topology(giraffe::compare_topologies(opts), fmt));
  });
}

gd_status gd_family(const char* input_shape, const char* format, char** out) {
  return guarded([&] {
    require(out, "out");
    const auto fmt = giraffe::parse_report_format(or_default(format, "table"));
    const giraffe::Shape input = input_shape ? giraffe::parse_shape(input_shape) : giraffe::kReferenceInputShape;
    *out = dup_string(giraffe::format_family(giraffe::family_rows(input), input, fmt));
  });
}

}  // extern "C"
