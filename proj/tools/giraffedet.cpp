#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "giraffe/giraffe_c.h"

namespace {

constexpr int kExitUsage = 1;

struct Options {
  std::string config;
  std::string format = "table";
  std::string output;
  std::string graph_file;

  std::string model;
  int depth = 0;
  int width = 0;
  std::string neck = "gfpn";
  std::string skip;
  std::string cross;
  std::string style;
  std::string order;
  int level_min = 0;
  int level_max = 0;
  std::string backbone;

  std::string input;
  std::uint64_t seed = 42;
  unsigned threads = 1;

  std::string dot;
  bool strict = false;

  std::string suite = "all";
  double tolerance = 1e-4;
  double step = 1e-4;
  double fault = 0.0;

  std::string compare;
  std::string match_flops;
};

const char* opt_str(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int report_error(gd_status st) {
  std::cerr << "error: " << gd_last_error() << '\n';
  return static_cast<int>(st);
}

int emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return 0;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) {
    std::cerr << "error: cannot write '" << path << "'\n";
    return kExitUsage;
  }
  return 0;
}

int emit_owned(gd_status st, char** text, const std::string& path) {
  if (st != GD_OK) return report_error(st);
  const std::string copy(*text);
  gd_string_free(*text);
  return emit(copy, path);
}

struct GraphHandle {
  gd_graph* g = nullptr;
  ~GraphHandle() { gd_graph_free(g); }
};

gd_status load_graph(const Options& o, GraphHandle& h) {
  if (!o.graph_file.empty()) {
    std::ifstream f(o.graph_file, std::ios::binary);
    if (!f) {
      std::cerr << "error: cannot read '" << o.graph_file << "'\n";
      return GD_ERR_USAGE;
    }
    const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const gd_status st = gd_graph_from_json(text.c_str(), &h.g);
    if (st != GD_OK) report_error(st);
    return st;
  }
  gd_build_options b;
  gd_build_options_init(&b);
  b.model = opt_str(o.model);
  b.depth = o.depth;
  b.width = o.width;
  b.neck = opt_str(o.neck);
  b.skip = opt_str(o.skip);
  b.cross = opt_str(o.cross);
  b.style = opt_str(o.style);
  b.order = opt_str(o.order);
  b.level_min = o.level_min;
  b.level_max = o.level_max;
  b.backbone = opt_str(o.backbone);
  const gd_status st = gd_graph_build(&b, &h.g);
  if (st != GD_OK) report_error(st);
  return st;
}

int cmd_build(const Options& o) {
  GraphHandle h;
  if (gd_status st = load_graph(o, h); st != GD_OK) return st;
  char* json = nullptr;
  if (gd_status st = gd_graph_to_json(h.g, &json); st != GD_OK) return report_error(st);
  const std::string text(json);
  gd_string_free(json);
  if (!o.dot.empty()) {
    char* dot = nullptr;
    if (int rc = emit_owned(gd_graph_to_dot(h.g, &dot), &dot, o.dot); rc != 0) return rc;
  }
  if (int rc = emit(text, o.output); rc != 0) return rc;
  std::cerr << gd_graph_node_count(h.g) << " nodes, " << gd_graph_edge_count(h.g) << " edges\n";
  return 0;
}

int cmd_analyze(const Options& o) {
  GraphHandle h;
  if (gd_status st = load_graph(o, h); st != GD_OK) return st;
  char* out = nullptr;
  const std::string input = o.input.empty() ? "1280x768x3" : o.input;
  return emit_owned(gd_analyze(h.g, input.c_str(), o.format.c_str(), o.strict ? 1 : 0, &out), &out, o.output);
}

int cmd_forward(const Options& o) {
  GraphHandle h;
  if (gd_status st = load_graph(o, h); st != GD_OK) return st;
  char* out = nullptr;
  const std::string input = o.input.empty() ? "random" : o.input;
  return emit_owned(gd_forward(h.g, input.c_str(), o.seed, o.threads, o.format.c_str(), &out), &out, o.output);
}

int cmd_gradcheck(const Options& o) {
  gd_gradcheck_options g;
  gd_gradcheck_options_init(&g);
  g.suite = o.suite.c_str();
  g.seed = o.seed;
  g.tolerance = o.tolerance;
  g.step = o.step;
  g.fault = o.fault;
  char* out = nullptr;
  int passed = 0;
  gd_status st;
  if (!o.graph_file.empty()) {
    GraphHandle h;
    if (st = load_graph(o, h); st != GD_OK) return st;
    if (o.input.empty()) {
      std::cerr << "error: --input HxWxC is required with --graph\n";
      return kExitUsage;
    }
    st = gd_gradcheck_graph(h.g, o.input.c_str(), &g, o.format.c_str(), &out, &passed);
  } else {
    st = gd_gradcheck(&g, o.format.c_str(), &out, &passed);
  }
  if (int rc = emit_owned(st, &out, o.output); rc != 0) return rc;
  return passed ? 0 : static_cast<int>(GD_ERR_VALIDATION);
}

int cmd_topo(const Options& o) {
  gd_topo_options t;
  gd_topo_options_init(&t);
  const std::string necks = o.compare.empty() ? (o.neck.empty() ? "gfpn-log2n" : o.neck) : o.compare;
  t.necks = necks.c_str();
  if (o.depth) t.depth = o.depth;
  if (o.width) t.width = o.width;
  if (o.level_min) t.level_min = o.level_min;
  if (o.level_max) t.level_max = o.level_max;
  t.match_flops = opt_str(o.match_flops);
  if (!o.input.empty()) t.input_shape = o.input.c_str();
  char* out = nullptr;
  return emit_owned(gd_topo(&t, o.format.c_str(), &out), &out, o.output);
}

int cmd_family(const Options& o) {
  char* out = nullptr;
  return emit_owned(gd_family(opt_str(o.input), o.format.c_str(), &out), &out, o.output);
}

void add_model_options(CLI::App& app, Options& o) {
  app.add_option("--model", o.model, "Family member, e.g. D11 (exclusive with --depth)");
  app.add_option("--depth", o.depth, "Neck depth (GFPN layers, or FPN/PANet stacks, BiFPN repeats)");
  app.add_option("--width", o.width, "Neck channels");
  app.add_option("--neck", o.neck, "gfpn, fpn, panet, bifpn or none (topo also takes gfpn-dense, gfpn-log2n, gfpn-none)");
  app.add_option("--skip", o.skip, "none, dense or log2n");
  app.add_option("--cross", o.cross, "queen or none");
  app.add_option("--style", o.style, "concat or sum");
  app.add_option("--order", o.order, "bottom_up or alternating");
  app.add_option("--level-min", o.level_min, "Lowest pyramid level");
  app.add_option("--level-max", o.level_max, "Highest pyramid level");
  app.add_option("--backbone", o.backbone, "s2d, stub or stub:3=128,4=256,...");
  app.add_option("--graph", o.graph_file, "Read the graph from a JSON file instead of building it");
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"GiraffeDet architecture toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Key=value config file; command-line flags win")->envname("GIRAFFE_CONFIG");
  app.add_option("--format", o.format, "table, json or csv")->check(CLI::IsMember({"table", "json", "csv"}));
  app.add_option("-o,--output", o.output, "Write the report here instead of stdout");
  app.add_option("--input", o.input, "Input shape HxWxC, or 'random'");
  app.add_option("--seed", o.seed, "Seed for inputs and weights");
  app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  add_model_options(app, o);

  auto* build = app.add_subcommand("build", "Build a model graph and write schema-v1 JSON");
  build->add_option("--dot", o.dot, "Also write a Graphviz file");

  auto* analyze = app.add_subcommand("analyze", "FLOPs and parameter report");
  analyze->add_flag("--strict", o.strict, "Also charge bias, SiLU, resampling and sums");

  app.add_subcommand("forward", "Run the graph on random data and print output checksums");

  auto* grad = app.add_subcommand("gradcheck", "Compare reverse-mode gradients with finite differences");
  grad->add_option("--suite", o.suite, "primitives, tiny-gfpn or all")
      ->check(CLI::IsMember({"primitives", "tiny-gfpn", "all"}));
  grad->add_option("--tolerance", o.tolerance, "Max relative error");
  grad->add_option("--step", o.step, "Finite-difference step");
  grad->add_option("--inject-fault", o.fault, "Scale analytic gradients by (1 + value)");

  auto* topo = app.add_subcommand("topo", "Edge counts and gradient-path lengths of necks");
  topo->add_option("--compare", o.compare, "Comma-separated necks, e.g. fpn,panet,bifpn,gfpn-dense,gfpn-log2n");
  topo->add_option("--match-flops", o.match_flops, "Fit every other neck's width to this neck's FLOPs");

  auto* family = app.add_subcommand("family", "Scaled GiraffeDet variants");
  std::string family_action = "list";
  family->add_option("action", family_action, "list")->check(CLI::IsMember({"list"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  if (*build) return cmd_build(o);
  if (*analyze) return cmd_analyze(o);
  if (app.got_subcommand("forward")) return cmd_forward(o);
  if (*grad) return cmd_gradcheck(o);
  if (*topo) {
    if (!app.get_option("--neck")->count() && o.compare.empty()) o.neck = "gfpn-log2n";
    return cmd_topo(o);
  }
  if (*family) return cmd_family(o);
  return kExitUsage;
}
