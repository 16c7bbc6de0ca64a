#include "giraffe/graph_io.hpp"

#include <sstream>

namespace giraffe {
namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  fail_validation(path + ": " + what);
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) schema_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(path, std::string("missing field '") + key + "'");
  return *it;
}

int get_int(const json& obj, const std::string& path, const char* key) {
  const json& v = require(obj, path, key);
  if (!v.is_number_integer()) schema_error(path + "." + key, "expected an integer");
  return v.get<int>();
}

int get_int_or(const json& obj, const std::string& path, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  return get_int(obj, path, key);
}

bool get_bool_or(const json& obj, const std::string& path, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) schema_error(path + "." + key, "expected a boolean");
  return v.get<bool>();
}

std::optional<int> get_optional_int(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return get_int(obj, path, key);
}

const char* style_name(FusionStyle s) { return s == FusionStyle::kConcat ? "concat" : "sum"; }

json op_to_json(const NodeOp& op) {
  json j;
  j["kind"] = op_kind_name(op);
  if (const auto* s = std::get_if<SourceOp>(&op)) {
    j["channels"] = s->channels;
    j["stride"] = s->stride;
  } else if (const auto* c = std::get_if<ConvOp>(&op)) {
    j["out_channels"] = c->out_channels;
    j["kernel"] = c->kernel;
    j["stride"] = c->stride;
    j["padding"] = c->padding;
    j["activation"] = c->activation;
    j["bias"] = c->bias;
  } else if (const auto* b = std::get_if<SpaceToDepthOp>(&op)) {
    j["block"] = b->block;
  } else if (const auto* f = std::get_if<FusionOp>(&op)) {
    j["style"] = style_name(f->style);
    j["out_channels"] = f->out_channels;
    j["kernel"] = f->kernel;
    j["activation"] = f->activation;
    j["bias"] = f->bias;
  }
  return j;
}

NodeOp op_from_json(const json& j, const std::string& path) {
  const json& kind_v = require(j, path, "kind");
  if (!kind_v.is_string()) schema_error(path + ".kind", "expected a string");
  const std::string kind = kind_v.get<std::string>();
  if (kind == "input") return InputOp{};
  if (kind == "source") return SourceOp{get_int(j, path, "channels"), get_int_or(j, path, "stride", 1)};
  if (kind == "conv") {
    ConvOp c;
    c.out_channels = get_int(j, path, "out_channels");
    c.kernel = get_int_or(j, path, "kernel", 1);
    c.stride = get_int_or(j, path, "stride", 1);
    c.padding = get_int_or(j, path, "padding", 0);
    c.activation = get_bool_or(j, path, "activation", false);
    c.bias = get_bool_or(j, path, "bias", true);
    if (c.out_channels <= 0 || c.kernel <= 0 || c.stride <= 0 || c.padding < 0)
      schema_error(path, "conv parameters out of range");
    return c;
  }
  if (kind == "silu") return SiluOp{};
  if (kind == "space_to_depth") {
    SpaceToDepthOp b{get_int_or(j, path, "block", 2)};
    if (b.block <= 0) schema_error(path + ".block", "must be positive");
    return b;
  }
  if (kind == "upsample2") return ResampleOp{true};
  if (kind == "downsample2") return ResampleOp{false};
  if (kind == "fusion") {
    FusionOp f;
    const json& style = require(j, path, "style");
    if (style == "concat") f.style = FusionStyle::kConcat;
    else if (style == "sum") f.style = FusionStyle::kSum;
    else schema_error(path + ".style", "expected \"concat\" or \"sum\"");
    f.out_channels = get_int(j, path, "out_channels");
    f.kernel = get_int_or(j, path, "kernel", 3);
    f.activation = get_bool_or(j, path, "activation", true);
    f.bias = get_bool_or(j, path, "bias", true);
    if (f.out_channels <= 0 || f.kernel <= 0 || f.kernel % 2 == 0)
      schema_error(path, "fusion parameters out of range");
    return f;
  }
  schema_error(path + ".kind", "unknown op kind '" + kind + "'");
}

json transform_to_json(const EdgeTransform& t) {
  if (t.kind == TransformKind::kProject) return json{{"project", t.out_channels}};
  return transform_name(t);
}

EdgeTransform transform_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "identity") return EdgeTransform::identity();
    if (s == "upsample2") return EdgeTransform::up();
    if (s == "downsample2") return EdgeTransform::down();
    schema_error(path, "unknown transform '" + s + "'");
  }
  if (j.is_object() && j.size() == 1 && j.contains("project")) {
    const int c = get_int(j, path, "project");
    if (c <= 0) schema_error(path + ".project", "must be positive");
    return EdgeTransform::project(c);
  }
  schema_error(path, "expected a transform name or {\"project\": channels}");
}

std::vector<NodeId> ids_from_json(const json& doc, const char* key) {
  const std::string path = std::string("$.") + key;
  const json& arr = require(doc, "$", key);
  if (!arr.is_array()) schema_error(path, "expected an array");
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number_integer())
      schema_error(path + "[" + std::to_string(i) + "]", "expected an integer node id");
    out.push_back(NodeId{arr[i].get<int>()});
  }
  return out;
}

}  // namespace

json to_json(const ArchitectureGraph& g) {
  json doc;
  doc["name"] = g.name();
  doc["schema_version"] = kGraphSchemaVersion;
  json nodes = json::array();
  for (const auto& n : g.nodes()) {
    json j;
    j["id"] = n.id.value;
    j["level"] = n.level ? json(*n.level) : json(nullptr);
    j["layer"] = n.layer ? json(*n.layer) : json(nullptr);
    j["role"] = n.role == Role::kBackbone ? "backbone" : "neck";
    j["label"] = n.label;
    j["op"] = op_to_json(n.op);
    if (n.shape) j["shape"] = {n.shape->height, n.shape->width, n.shape->channels};
    nodes.push_back(std::move(j));
  }
  doc["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& e : g.edges())
    edges.push_back({{"src", e.src.value}, {"dst", e.dst.value},
                     {"transform", transform_to_json(e.transform)}});
  doc["edges"] = std::move(edges);
  json ins = json::array();
  for (NodeId id : g.inputs()) ins.push_back(id.value);
  doc["inputs"] = std::move(ins);
  json outs = json::array();
  for (NodeId id : g.outputs()) outs.push_back(id.value);
  doc["outputs"] = std::move(outs);
  json meta = json::object();
  for (const auto& [k, v] : g.metadata()) meta[k] = v;
  doc["metadata"] = std::move(meta);
  return doc;
}

ArchitectureGraph from_json(const json& doc) {
  if (!doc.is_object()) schema_error("$", "expected an object");
  const int version = get_int(doc, "$", "schema_version");
  if (version != kGraphSchemaVersion)
    schema_error("$.schema_version", "unsupported version " + std::to_string(version));
  const json& name = require(doc, "$", "name");
  if (!name.is_string()) schema_error("$.name", "expected a string");
  ArchitectureGraph g(name.get<std::string>());

  const json& nodes = require(doc, "$", "nodes");
  if (!nodes.is_array()) schema_error("$.nodes", "expected an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "$.nodes[" + std::to_string(i) + "]";
    const json& j = nodes[i];
    FeatureNode n;
    n.id = NodeId{get_int(j, path, "id")};
    n.level = get_optional_int(j, path, "level");
    n.layer = get_optional_int(j, path, "layer");
    if (j.contains("role")) {
      const json& r = j.at("role");
      if (r == "backbone") n.role = Role::kBackbone;
      else if (r == "neck") n.role = Role::kNeck;
      else schema_error(path + ".role", "expected \"backbone\" or \"neck\"");
    }
    if (j.contains("label")) {
      if (!j.at("label").is_string()) schema_error(path + ".label", "expected a string");
      n.label = j.at("label").get<std::string>();
    }
    n.op = op_from_json(require(j, path, "op"), path + ".op");
    if (j.contains("shape") && !j.at("shape").is_null()) {
      const json& s = j.at("shape");
      if (!s.is_array() || s.size() != 3)
        schema_error(path + ".shape", "expected [height, width, channels]");
      for (std::size_t k = 0; k < 3; ++k)
        if (!s[k].is_number_integer() || s[k].get<int>() <= 0)
          schema_error(path + ".shape[" + std::to_string(k) + "]", "expected a positive integer");
      n.shape = Shape{s[0].get<int>(), s[1].get<int>(), s[2].get<int>()};
    }
    try {
      g.insert_node(std::move(n));
    } catch (const Error& e) {
      schema_error(path + ".id", e.what());
    }
  }

  const json& edges = require(doc, "$", "edges");
  if (!edges.is_array()) schema_error("$.edges", "expected an array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string path = "$.edges[" + std::to_string(i) + "]";
    const json& j = edges[i];
    NodeId src{get_int(j, path, "src")};
    NodeId dst{get_int(j, path, "dst")};
    EdgeTransform t = j.contains("transform")
                          ? transform_from_json(j.at("transform"), path + ".transform")
                          : EdgeTransform::identity();
    if (!g.contains(src)) schema_error(path + ".src", "unknown node " + std::to_string(src.value));
    if (!g.contains(dst)) schema_error(path + ".dst", "unknown node " + std::to_string(dst.value));
    g.add_edge(src, dst, t);
  }

  for (const char* key : {"inputs", "outputs"}) {
    auto ids = ids_from_json(doc, key);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!g.contains(ids[i]))
        schema_error(std::string("$.") + key + "[" + std::to_string(i) + "]",
                     "unknown node " + std::to_string(ids[i].value));
      if (std::string(key) == "inputs") g.add_input(ids[i]);
      else g.add_output(ids[i]);
    }
  }

  if (doc.contains("metadata")) {
    const json& meta = doc.at("metadata");
    if (!meta.is_object()) schema_error("$.metadata", "expected an object");
    for (auto it = meta.begin(); it != meta.end(); ++it) {
      if (!it.value().is_string())
        schema_error("$.metadata." + it.key(), "expected a string value");
      g.metadata()[it.key()] = it.value().get<std::string>();
    }
  }
  return g;
}

std::string serialize(const ArchitectureGraph& g, int indent) { return to_json(g).dump(indent); }

ArchitectureGraph deserialize(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    schema_error("$", std::string("malformed JSON: ") + e.what());
  }
  return from_json(doc);
}

std::string to_dot(const ArchitectureGraph& g) {
  std::ostringstream os;
  os << "digraph \"" << (g.name().empty() ? "graph" : g.name()) << "\" {\n";
  os << "  rankdir=LR;\n";
  os << "  node [shape=box, fontname=\"Helvetica\"];\n";
  for (const auto& n : g.nodes()) {
    std::string label;
    if (n.level && n.layer) {
      label = "P" + std::to_string(*n.level) + "^" + std::to_string(*n.layer);
    } else {
      label = n.label.empty() ? op_kind_name(n.op) : n.label;
    }
    if (n.shape) label += "\\n" + to_string(*n.shape);
    os << "  n" << n.id.value << " [label=\"" << label << "\"";
    if (n.role == Role::kBackbone) os << ", style=filled, fillcolor=\"#e8e8e8\"";
    os << "];\n";
  }
  for (const auto& e : g.edges()) {
    os << "  n" << e.src.value << " -> n" << e.dst.value;
    switch (e.transform.kind) {
      case TransformKind::kIdentity: break;
      case TransformKind::kUpsample2: os << " [style=dashed, color=blue, label=\"up\"]"; break;
      case TransformKind::kDownsample2: os << " [style=dotted, color=red, label=\"down\"]"; break;
      case TransformKind::kProject:
        os << " [style=bold, color=darkgreen, label=\"proj " << e.transform.out_channels << "\"]";
        break;
    }
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace giraffe
