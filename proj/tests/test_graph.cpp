#include <algorithm>
#include <regex>
#include <set>

#include "doctest.h"
#include "giraffe/graph.hpp"
#include "giraffe/graph_io.hpp"
#include "giraffe/model.hpp"

using namespace giraffe;

namespace {

ArchitectureGraph small_chain() {
  ArchitectureGraph g("chain");
  const NodeId in = g.add_node(InputOp{}, Role::kBackbone, "image");
  const NodeId c = g.add_node(ConvOp{8, 3, 2, 1, true}, Role::kBackbone, "conv");
  const NodeId s = g.add_node(SpaceToDepthOp{}, Role::kBackbone, "s2d");
  g.add_edge(in, c);
  g.add_edge(c, s);
  g.add_input(in);
  g.add_output(s);
  return g;
}

}  // namespace

TEST_CASE("node ids are sequential and lookups work") {
  const auto g = small_chain();
  CHECK(g.nodes().size() == 3);
  CHECK(g.node(NodeId{1}).label == "conv");
  CHECK(g.in_edges(NodeId{2}).size() == 1);
  CHECK(g.out_edges(NodeId{0}).size() == 1);
  CHECK_THROWS_AS(g.node(NodeId{7}), Error);
  CHECK(op_kind_name(g.node(NodeId{2}).op) == "space_to_depth");
}

TEST_CASE("edges must join existing nodes") {
  auto g = small_chain();
  CHECK_THROWS_AS(g.add_edge(NodeId{0}, NodeId{9}), Error);
  CHECK_THROWS_AS(g.insert_node(FeatureNode{NodeId{1}, {}, {}, Role::kBackbone, "dup", SiluOp{}, {}}), Error);
}

TEST_CASE("toposort is deterministic and respects edges") {
  ArchitectureGraph g;
  const NodeId a = g.add_node(SourceOp{4, 8}, Role::kBackbone, "a");
  const NodeId b = g.add_node(SourceOp{4, 8}, Role::kBackbone, "b");
  const NodeId f = g.add_node(FusionOp{FusionStyle::kSum, 4}, Role::kNeck, "f", 3, 1);
  g.add_edge(b, f);
  g.add_edge(a, f);
  const auto order = toposort(g);
  CHECK(order == std::vector<NodeId>{a, b, f});
}

TEST_CASE("toposort names the nodes on a cycle") {
  ArchitectureGraph g;
  const NodeId src = g.add_node(SourceOp{1, 1}, Role::kBackbone, "src");
  const NodeId a = g.add_node(FusionOp{FusionStyle::kSum, 1}, Role::kNeck, "a", 3, 1);
  const NodeId b = g.add_node(FusionOp{FusionStyle::kSum, 1}, Role::kNeck, "b", 3, 2);
  const NodeId c = g.add_node(FusionOp{FusionStyle::kSum, 1}, Role::kNeck, "c", 3, 3);
  const NodeId tail = g.add_node(SiluOp{}, Role::kNeck, "tail");
  g.add_edge(src, a);
  g.add_edge(a, b);
  g.add_edge(b, c);
  g.add_edge(c, a);
  g.add_edge(c, tail);
  g.add_input(src);
  try {
    toposort(g);
    FAIL("expected a cycle error");
  } catch (const CycleError& e) {
    CHECK(e.nodes() == std::vector<NodeId>{a, b, c});
    CHECK(std::string(e.what()).find("{1,2,3}") != std::string::npos);
    CHECK(e.kind() == ErrorKind::kValidation);
  }
  CHECK_THROWS_AS(validate(g), CycleError);
}

TEST_CASE("validate catches structural errors") {
  SUBCASE("input that is not a source") {
    auto g = small_chain();
    g.add_input(NodeId{1});
    CHECK_THROWS_AS(validate(g), Error);
  }
  SUBCASE("unary op with two in-edges") {
    auto g = small_chain();
    g.add_edge(NodeId{0}, NodeId{2});
    CHECK_THROWS_AS(validate(g), Error);
  }
  SUBCASE("unreachable node") {
    auto g = small_chain();
    g.add_node(SiluOp{}, Role::kBackbone, "orphan");
    CHECK_THROWS_AS(validate(g), Error);
  }
  SUBCASE("duplicate neck key") {
    ArchitectureGraph g;
    const NodeId s = g.add_node(SourceOp{1, 8}, Role::kBackbone);
    const NodeId a = g.add_node(FusionOp{FusionStyle::kSum, 1}, Role::kNeck, "", 3, 1);
    const NodeId b = g.add_node(FusionOp{FusionStyle::kSum, 1}, Role::kNeck, "", 3, 1);
    g.add_edge(s, a);
    g.add_edge(s, b);
    g.add_input(s);
    CHECK_THROWS_AS(validate(g), Error);
  }
  SUBCASE("valid chain") { CHECK_NOTHROW(validate(small_chain())); }
}

TEST_CASE("shape inference") {
  const auto g = infer_shapes(small_chain(), Shape{16, 8, 3});
  CHECK(g.node(NodeId{1}).shape == Shape{8, 4, 8});
  CHECK(g.node(NodeId{2}).shape == Shape{4, 2, 32});
  CHECK(max_stride(g) == 4);
  CHECK_THROWS_AS(infer_shapes(small_chain(), Shape{6, 8, 3}), Error);
}

TEST_CASE("shape inference rejects conflicting fusion inputs") {
  ArchitectureGraph g;
  const NodeId a = g.add_node(SourceOp{4, 8}, Role::kBackbone, "a");
  const NodeId b = g.add_node(SourceOp{6, 8}, Role::kBackbone, "b");
  const NodeId f = g.add_node(FusionOp{FusionStyle::kSum, 4}, Role::kNeck, "f", 3, 1);
  g.add_edge(a, f);
  g.add_edge(b, f);
  g.add_input(a);
  g.add_input(b);
  g.add_output(f);
  CHECK_THROWS_AS(infer_shapes(g, Shape{64, 64, 3}), Error);
  // concat only needs matching spatial dims
  std::get<FusionOp>(g.mutable_node(f).op).style = FusionStyle::kConcat;
  const auto shaped = infer_shapes(g, Shape{64, 64, 3});
  CHECK(shaped.node(f).shape == Shape{8, 8, 4});
  CHECK(conv_input_channels(shaped, f) == 10);
}

TEST_CASE("divisibility message names the stride") {
  ModelSpec spec;
  spec.model = "D7";
  const auto g = build_model(spec);
  CHECK(max_stride(g) == 128);
  try {
    infer_shapes(g, Shape{100, 100, 3});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("not divisible by 128") != std::string::npos);
  }
}

TEST_CASE("JSON round trip preserves the graph, including edge order") {
  ModelSpec spec;
  spec.model = "D29";
  const auto g = infer_shapes(build_model(spec), Shape{256, 256, 3});
  const auto back = deserialize(serialize(g));
  CHECK(back == g);
  CHECK(back.edges() == g.edges());
  const auto plain = build_model(spec);
  CHECK(deserialize(serialize(plain, -1)) == plain);
}

TEST_CASE("JSON schema errors carry a path") {
  auto expect_error = [](const std::string& text, const std::string& needle) {
    try {
      deserialize(text);
      FAIL("expected a schema error for " << text);
    } catch (const Error& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
      CHECK(e.kind() == ErrorKind::kValidation);
    }
  };
  nlohmann::json doc = to_json(small_chain());
  auto with = [&](auto edit) {
    nlohmann::json d = doc;
    edit(d);
    return d.dump();
  };
  expect_error("{not json", "$: malformed JSON");
  expect_error("[]", "$: expected an object");
  expect_error(with([](auto& d) { d["schema_version"] = 2; }), "$.schema_version");
  expect_error(with([](auto& d) { d.erase("nodes"); }), "missing field 'nodes'");
  expect_error(with([](auto& d) { d["nodes"][1]["op"]["kind"] = "deconv"; }), "$.nodes[1].op");
  expect_error(with([](auto& d) { d["nodes"][2]["id"] = 1; }), "$.nodes[2].id");
  expect_error(with([](auto& d) { d["edges"][0]["dst"] = 42; }), "$.edges[0].dst");
  expect_error(with([](auto& d) { d["edges"][0]["transform"] = "sideways"; }), "$.edges[0].transform");
  expect_error(with([](auto& d) { d["edges"][0]["transform"] = {{"project", 0}}; }), "$.edges[0].transform.project");
  expect_error(with([](auto& d) { d["outputs"][0] = 99; }), "$.outputs[0]");
  expect_error(with([](auto& d) { d["nodes"][0]["shape"] = {1, 2}; }), "$.nodes[0].shape");
}

TEST_CASE("DOT export has one statement per node and edge") {
  ModelSpec spec;
  spec.model = "D11";
  const auto g = build_model(spec);
  const std::string dot = to_dot(g);
  const std::regex node_re(R"(^  n\d+ \[label=)");
  const std::regex edge_re(R"(^  n\d+ -> n\d+)");
  std::size_t nodes = 0, edges = 0, up = 0, down = 0;
  std::istringstream is(dot);
  for (std::string line; std::getline(is, line);) {
    if (std::regex_search(line, node_re)) ++nodes;
    if (std::regex_search(line, edge_re)) ++edges;
    if (line.find("style=dashed") != std::string::npos) ++up;
    if (line.find("style=dotted") != std::string::npos) ++down;
  }
  CHECK(nodes == g.nodes().size());
  CHECK(edges == g.edges().size());
  std::size_t up_edges = 0, down_edges = 0;
  for (const auto& e : g.edges()) {
    up_edges += e.transform.kind == TransformKind::kUpsample2;
    down_edges += e.transform.kind == TransformKind::kDownsample2;
  }
  CHECK(up == up_edges);
  CHECK(down == down_edges);
  CHECK(dot.find("label=\"P5^8") != std::string::npos);
}

TEST_CASE("merge remaps ids") {
  auto a = small_chain();
  const auto b = small_chain();
  const auto map = a.merge(b);
  CHECK(a.nodes().size() == 6);
  CHECK(map.at(NodeId{0}) == NodeId{3});
  CHECK(a.in_edges(NodeId{5}).front().src == NodeId{4});
}
