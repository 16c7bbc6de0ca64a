#include "giraffe/report.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <sstream>

#include "giraffe/backbone.hpp"
#include "giraffe/execute.hpp"
#include "giraffe/model.hpp"
#include "json.hpp"

namespace giraffe {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string gflops(std::uint64_t f) { return fixed(to_gflops(f), 2) + "G"; }

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

json shape_json(const Shape& s) { return json::array({s.height, s.width, s.channels}); }

/// Left-aligned text columns, numeric columns right-aligned.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) : rows_{std::move(header)} {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  void right_align(std::size_t col) { right_.push_back(col); }

  std::string str() const {
    std::vector<std::size_t> w;
    for (const auto& r : rows_) {
      if (w.size() < r.size()) w.resize(r.size(), 0);
      for (std::size_t i = 0; i < r.size(); ++i) w[i] = std::max(w[i], r[i].size());
    }
    std::ostringstream os;
    for (std::size_t ri = 0; ri < rows_.size(); ++ri) {
      const auto& r = rows_[ri];
      std::string line;
      for (std::size_t i = 0; i < r.size(); ++i) {
        const bool right = std::find(right_.begin(), right_.end(), i) != right_.end();
        const std::string pad(w[i] - r[i].size(), ' ');
        line += right ? pad + r[i] : r[i] + pad;
        if (i + 1 < r.size()) line += "  ";
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      os << line << '\n';
      if (ri == 0) {
        std::size_t total = 0;
        for (std::size_t x : w) total += x + 2;
        os << std::string(total >= 2 ? total - 2 : 0, '-') << '\n';
      }
    }
    return os.str();
  }

 private:
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> right_;
};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string role_name(Role r) { return r == Role::kNeck ? "neck" : "backbone"; }

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t neck_flops_of(const ArchitectureGraph& g, const Shape& input) {
  return analyze(g, input).neck_flops;
}

}  // namespace

ReportFormat parse_report_format(const std::string& s) {
  if (s == "table") return ReportFormat::kTable;
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv") return ReportFormat::kCsv;
  fail_usage("unknown format '" + s + "' (expected table, json or csv)");
}

Shape parse_input_spec(const std::string& spec) {
  if (spec == "random") return kRandomInputShape;
  return parse_shape(spec);
}

std::string format_cost(const CostReport& r, ReportFormat fmt) {
  const std::string mode = r.mode == CostMode::kMac ? "mac" : "strict";
  if (fmt == ReportFormat::kJson) {
    json rows = json::array();
    for (const auto& row : r.rows) {
      json j{{"id", row.id.value},
             {"kind", row.kind},
             {"label", row.label},
             {"role", role_name(row.role)},
             {"output", shape_json(row.shape)},
             {"flops", row.flops},
             {"cumulative_flops", row.cumulative},
             {"params", row.params}};
      if (row.filters > 0) {
        j["filters"] = row.filters;
        j["filter"] = row.filter;
        j["stride"] = row.stride;
        j["padding"] = row.padding;
      }
      rows.push_back(std::move(j));
    }
    json doc{{"graph", r.graph},
             {"input", shape_json(r.input)},
             {"mode", mode},
             {"rows", rows},
             {"totals",
              {{"backbone_flops", r.backbone_flops},
               {"neck_flops", r.neck_flops},
               {"total_flops", r.total_flops},
               {"backbone_gflops", to_gflops(r.backbone_flops)},
               {"neck_gflops", to_gflops(r.neck_flops)},
               {"total_gflops", to_gflops(r.total_flops)},
               {"backbone_params", r.backbone_params},
               {"neck_params", r.neck_params},
               {"total_params", r.total_params}}}};
    return doc.dump(2) + "\n";
  }
  if (fmt == ReportFormat::kCsv) {
    std::ostringstream os;
    os << "id,kind,label,role,filters,filter,stride,padding,output,flops,cumulative_flops,cumulative_gflops,params\n";
    for (const auto& row : r.rows) {
      os << row.id.value << ',' << csv_escape(row.kind) << ',' << csv_escape(row.label) << ','
         << role_name(row.role) << ',' << (row.filters ? std::to_string(row.filters) : "") << ','
         << row.filter << ',' << (row.filters ? std::to_string(row.stride) : "") << ','
         << (row.filters ? std::to_string(row.padding) : "") << ',' << to_string(row.shape) << ','
         << row.flops << ',' << row.cumulative << ',' << fixed(to_gflops(row.cumulative), 2) << ','
         << row.params << '\n';
    }
    return os.str();
  }
  TextTable t({"#", "Type", "Label", "Filters", "Size", "Stride", "Pad", "Output", "FLOPs", "Cumulative",
               "Params"});
  for (std::size_t col : {0, 3, 5, 6, 8, 9, 10}) t.right_align(col);
  for (const auto& row : r.rows) {
    const bool conv = row.filters > 0;
    t.add({std::to_string(row.id.value), row.kind, row.label, conv ? std::to_string(row.filters) : "",
           row.filter, conv ? std::to_string(row.stride) : "", conv ? std::to_string(row.padding) : "",
           to_string(row.shape), std::to_string(row.flops), gflops(row.cumulative),
           std::to_string(row.params)});
  }
  std::ostringstream os;
  os << "graph " << r.graph << "  input " << to_string(r.input) << "  flops mode " << mode
     << "\n\n";
  os << t.str() << '\n';
  os << "backbone  " << gflops(r.backbone_flops) << "  (" << r.backbone_flops << " FLOPs, "
     << r.backbone_params << " params)\n";
  os << "neck      " << gflops(r.neck_flops) << "  (" << r.neck_flops << " FLOPs, " << r.neck_params
     << " params)\n";
  os << "total     " << gflops(r.total_flops) << "  (" << r.total_flops << " FLOPs, " << r.total_params
     << " params)\n";
  return os.str();
}

ForwardSummary run_forward(const ArchitectureGraph& graph, const Shape& input, std::uint64_t seed,
                           unsigned threads) {
  const ArchitectureGraph g = infer_shapes(graph, input);
  const auto inputs = random_inputs<float>(g, seed);
  const auto weights = init_weights<float>(g, seed + 1);
  const auto values = execute<float>(g, inputs, weights, ExecOptions{threads});
  ForwardSummary s;
  s.graph = g.name();
  s.input = input;
  s.seed = seed;
  s.threads = threads;
  std::uint64_t h = 0x9E3779B97F4A7C15ULL;
  for (NodeId id : g.outputs()) {
    const FeatureNode& n = g.node(id);
    ForwardOutput o{id, n.label, n.level, values.at(id).shape(), checksum(values.at(id))};
    h = mix64(h ^ o.checksum);
    s.outputs.push_back(std::move(o));
  }
  s.combined = h;
  return s;
}

std::string format_forward(const ForwardSummary& s, ReportFormat fmt) {
  if (fmt == ReportFormat::kJson) {
    json outs = json::array();
    for (const auto& o : s.outputs)
      outs.push_back({{"id", o.id.value},
                      {"label", o.label},
                      {"level", o.level ? json(*o.level) : json(nullptr)},
                      {"shape", shape_json(o.shape)},
                      {"checksum", hex64(o.checksum)}});
    json doc{{"graph", s.graph},         {"input", shape_json(s.input)}, {"seed", s.seed},
             {"threads", s.threads},     {"outputs", outs},             {"checksum", hex64(s.combined)}};
    return doc.dump(2) + "\n";
  }
  if (fmt == ReportFormat::kCsv) {
    std::ostringstream os;
    os << "id,label,level,shape,checksum\n";
    for (const auto& o : s.outputs)
      os << o.id.value << ',' << csv_escape(o.label) << ',' << (o.level ? std::to_string(*o.level) : "")
         << ',' << to_string(o.shape) << ',' << hex64(o.checksum) << '\n';
    return os.str();
  }
  TextTable t({"Output", "Level", "Shape", "Checksum"});
  for (const auto& o : s.outputs)
    t.add({o.label, o.level ? "P" + std::to_string(*o.level) : "", to_string(o.shape), hex64(o.checksum)});
  std::ostringstream os;
  os << "graph " << s.graph << "  input " << to_string(s.input) << "  seed " << s.seed << "  threads "
     << s.threads << "\n\n"
     << t.str() << "\ncombined checksum " << hex64(s.combined) << '\n';
  return os.str();
}

std::string format_gradcheck(const std::vector<GradcheckReport>& reports, ReportFormat fmt) {
  bool all = true;
  for (const auto& r : reports) all = all && r.passed();
  if (fmt == ReportFormat::kJson) {
    json suites = json::array();
    for (const auto& r : reports) {
      json entries = json::array();
      for (const auto& e : r.entries)
        entries.push_back({{"name", e.name},
                           {"checked", e.checked},
                           {"max_rel_error", e.max_rel_error},
                           {"passed", e.passed}});
      suites.push_back({{"suite", r.suite},
                        {"tolerance", r.tolerance},
                        {"max_rel_error", r.max_rel_error()},
                        {"passed", r.passed()},
                        {"entries", entries}});
    }
    return json{{"passed", all}, {"suites", suites}}.dump(2) + "\n";
  }
  if (fmt == ReportFormat::kCsv) {
    std::ostringstream os;
    os << "suite,block,checked,max_rel_error,passed\n";
    for (const auto& r : reports)
      for (const auto& e : r.entries)
        os << r.suite << ',' << csv_escape(e.name) << ',' << e.checked << ',' << sci(e.max_rel_error) << ','
           << (e.passed ? "pass" : "fail") << '\n';
    return os.str();
  }
  std::ostringstream os;
  for (const auto& r : reports) {
    TextTable t({"Block", "Checked", "Max rel err", "Result"});
    t.right_align(1);
    t.right_align(2);
    for (const auto& e : r.entries)
      t.add({e.name, std::to_string(e.checked), sci(e.max_rel_error), e.passed ? "pass" : "FAIL"});
    os << "suite " << r.suite << "  tolerance " << sci(r.tolerance) << "\n\n"
       << t.str() << "\nmax rel err " << sci(r.max_rel_error()) << "  " << (r.passed() ? "PASS" : "FAIL")
       << "\n\n";
  }
  os << (all ? "all gradient checks passed" : "gradient check FAILED") << '\n';
  return os.str();
}

NeckChoice parse_neck_choice(const std::string& s) {
  NeckChoice c;
  c.name = s;
  if (s.rfind("gfpn", 0) == 0) {
    c.kind = NeckKind::kGfpn;
    if (s == "gfpn") return c;
    if (s.size() > 5 && s[4] == '-') {
      c.skip_mode = parse_skip_mode(s.substr(5));
      return c;
    }
    fail_usage("unknown neck '" + s + "'");
  }
  c.kind = parse_neck_kind(s);
  return c;
}

ArchitectureGraph build_neck(const NeckChoice& choice, int depth, int width, const LevelRange& levels) {
  const Pyramid pyramid = pyramid_of(build_pyramid_stub(default_stub_config()));
  ArchitectureGraph g;
  switch (choice.kind) {
    case NeckKind::kGfpn: {
      GfpnConfig cfg;
      cfg.depth = depth;
      cfg.width = width;
      cfg.levels = levels;
      cfg.skip_mode = choice.skip_mode;
      g = build_gfpn(cfg, pyramid);
      break;
    }
    case NeckKind::kFpn:
      g = build_fpn(levels, width, pyramid, depth);
      break;
    case NeckKind::kPanet:
      g = build_panet(levels, width, pyramid, depth);
      break;
    case NeckKind::kBifpn:
      g = build_bifpn(levels, width, pyramid, depth);
      break;
  }
  g.set_name(choice.name);
  return g;
}

std::vector<TopologyRow> compare_topologies(const TopologyOptions& opts) {
  if (opts.necks.empty()) fail_usage("no necks to compare");
  std::vector<NeckChoice> choices;
  for (const auto& n : opts.necks) choices.push_back(parse_neck_choice(n));

  std::optional<std::uint64_t> target;
  if (opts.match_flops) {
    const NeckChoice ref = parse_neck_choice(*opts.match_flops);
    target = neck_flops_of(build_neck(ref, opts.depth, opts.width, opts.levels), opts.input);
  }

  std::vector<TopologyRow> rows;
  for (const auto& c : choices) {
    int width = opts.width;
    if (target && c.name != *opts.match_flops) {
      width = match_width(
          [&](int w) { return neck_flops_of(build_neck(c, opts.depth, w, opts.levels), opts.input); },
          *target, 1, 4 * std::max(opts.width, 64));
    }
    const ArchitectureGraph g = build_neck(c, opts.depth, width, opts.levels);
    const CostReport cost = analyze(g, opts.input);
    TopologyRow row;
    row.topology = path_report(g, c.kind, opts.depth);
    row.topology.neck = c.name;
    row.width = width;
    row.neck_flops = cost.neck_flops;
    row.neck_params = cost.neck_params;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_topology(const std::vector<TopologyRow>& rows, ReportFormat fmt) {
  auto depth_note = [](const TopologyReport& t) {
    return t.effective_depth == t.layers ? std::string() : std::string("x2 depth");
  };
  if (fmt == ReportFormat::kJson) {
    json arr = json::array();
    for (const auto& row : rows) {
      const auto& t = row.topology;
      json levels = json::array();
      for (const auto& lp : t.levels) {
        json same = json::object();
        json full = json::object();
        for (auto [layer, d] : lp.same_level) same[std::to_string(layer)] = d;
        for (auto [layer, d] : lp.full_graph) full[std::to_string(layer)] = d;
        levels.push_back({{"level", lp.level},
                          {"max_same_level", lp.max_same_level},
                          {"max_full_graph", lp.max_full_graph},
                          {"same_level", same},
                          {"full_graph", full}});
      }
      arr.push_back({{"neck", t.neck},
                     {"layers", t.layers},
                     {"effective_depth", t.effective_depth},
                     {"width", row.width},
                     {"nodes", t.node_count},
                     {"edges", t.edge_count},
                     {"same_level_edges", t.same_level_edges},
                     {"skip_edges", t.skip_edges},
                     {"edges_by_transform", t.edges_by_transform},
                     {"max_same_level_distance", t.max_same_level},
                     {"max_full_graph_distance", t.max_full_graph},
                     {"neck_flops", row.neck_flops},
                     {"neck_gflops", to_gflops(row.neck_flops)},
                     {"neck_params", row.neck_params},
                     {"levels", levels}});
    }
    return json{{"necks", arr}}.dump(2) + "\n";
  }
  if (fmt == ReportFormat::kCsv) {
    std::ostringstream os;
    os << "neck,layers,effective_depth,width,nodes,edges,same_level_edges,skip_edges,max_same_level_distance,"
          "max_full_graph_distance,neck_flops,neck_params\n";
    for (const auto& row : rows) {
      const auto& t = row.topology;
      os << t.neck << ',' << t.layers << ',' << t.effective_depth << ',' << row.width << ',' << t.node_count
         << ',' << t.edge_count << ',' << t.same_level_edges << ',' << t.skip_edges << ','
         << t.max_same_level << ',' << t.max_full_graph << ',' << row.neck_flops << ',' << row.neck_params
         << '\n';
    }
    return os.str();
  }
  TextTable t({"Neck", "Layers", "Depth", "", "Width", "Nodes", "Edges", "Same-level", "Skip", "Max dist",
               "Max dist (all)", "Neck FLOPs", "Params"});
  for (std::size_t col : {1, 2, 4, 5, 6, 7, 8, 9, 10, 11, 12}) t.right_align(col);
  for (const auto& row : rows) {
    const auto& r = row.topology;
    t.add({r.neck, std::to_string(r.layers), std::to_string(r.effective_depth), depth_note(r),
           std::to_string(row.width), std::to_string(r.node_count), std::to_string(r.edge_count),
           std::to_string(r.same_level_edges), std::to_string(r.skip_edges), std::to_string(r.max_same_level),
           std::to_string(r.max_full_graph), gflops(row.neck_flops), std::to_string(row.neck_params)});
  }
  return t.str();
}

std::vector<FamilyRow> family_rows(const Shape& input) {
  std::vector<FamilyRow> rows;
  for (const auto& e : family_table()) {
    ModelSpec spec;
    spec.model = e.name;
    const CostReport r = analyze(build_model(spec), input);
    rows.push_back({e, r.backbone_flops, r.neck_flops, r.total_flops});
  }
  return rows;
}

std::string format_family(const std::vector<FamilyRow>& rows, const Shape& input, ReportFormat fmt) {
  if (fmt == ReportFormat::kJson) {
    json arr = json::array();
    for (const auto& r : rows)
      arr.push_back({{"name", r.entry.name},
                     {"phi_d", r.entry.phi_d},
                     {"phi_w", to_string(r.entry.phi_w)},
                     {"depth", r.entry.derived_depth},
                     {"width", r.entry.derived_width},
                     {"backbone_flops", r.backbone_flops},
                     {"neck_flops", r.neck_flops},
                     {"total_flops", r.total_flops}});
    return json{{"input", shape_json(input)}, {"family", arr}}.dump(2) + "\n";
  }
  if (fmt == ReportFormat::kCsv) {
    std::ostringstream os;
    os << "name,phi_d,phi_w,depth,width,backbone_flops,neck_flops,total_flops\n";
    for (const auto& r : rows)
      os << r.entry.name << ',' << r.entry.phi_d << ',' << to_string(r.entry.phi_w) << ','
         << r.entry.derived_depth << ',' << r.entry.derived_width << ',' << r.backbone_flops << ','
         << r.neck_flops << ',' << r.total_flops << '\n';
    return os.str();
  }
  TextTable t({"Model", "phi_d", "phi_w", "Depth", "Width", "Backbone", "Neck", "Total"});
  for (std::size_t col : {1, 2, 3, 4, 5, 6, 7}) t.right_align(col);
  for (const auto& r : rows)
    t.add({r.entry.name, std::to_string(r.entry.phi_d), to_string(r.entry.phi_w),
           std::to_string(r.entry.derived_depth), std::to_string(r.entry.derived_width), gflops(r.backbone_flops),
           gflops(r.neck_flops), gflops(r.total_flops)});
  return "FLOPs at " + to_string(input) + "\n\n" + t.str();
}

}  // namespace giraffe
