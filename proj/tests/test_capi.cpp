#include <string>

#include "doctest.h"
#include "giraffe/giraffe_c.h"
#include "json.hpp"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  gd_string_free(s);
  return out;
}

gd_graph* build(const char* model, int depth = 0, int width = 0) {
  gd_build_options o;
  gd_build_options_init(&o);
  o.model = model;
  o.depth = depth;
  o.width = width;
  gd_graph* g = nullptr;
  REQUIRE(gd_graph_build(&o, &g) == GD_OK);
  return g;
}

}  // namespace

TEST_CASE("C API: build, serialize, reload") {
  gd_graph* g = build("D11");
  char* json = nullptr;
  REQUIRE(gd_graph_to_json(g, &json) == GD_OK);
  const std::string text = take(json);
  const auto doc = nlohmann::json::parse(text);
  CHECK(doc["schema_version"] == 1);
  CHECK(doc["nodes"].size() == gd_graph_node_count(g));
  CHECK(doc["edges"].size() == gd_graph_edge_count(g));
  CHECK(doc["metadata"]["depth"] == "11");

  gd_graph* back = nullptr;
  REQUIRE(gd_graph_from_json(text.c_str(), &back) == GD_OK);
  char* json2 = nullptr;
  REQUIRE(gd_graph_to_json(back, &json2) == GD_OK);
  CHECK(take(json2) == text);

  char* dot = nullptr;
  REQUIRE(gd_graph_to_dot(g, &dot) == GD_OK);
  CHECK(take(dot).rfind("digraph", 0) == 0);
  gd_graph_free(back);
  gd_graph_free(g);
}

TEST_CASE("C API: status codes and last error") {
  gd_build_options o;
  gd_build_options_init(&o);
  o.model = "D7";
  o.depth = 3;
  gd_graph* g = nullptr;
  CHECK(gd_graph_build(&o, &g) == GD_ERR_USAGE);
  CHECK(g == nullptr);
  CHECK(std::string(gd_last_error()).find("mutually exclusive") != std::string::npos);

  CHECK(gd_graph_from_json("{\"schema_version\": 1}", &g) == GD_ERR_VALIDATION);
  CHECK(std::string(gd_last_error()).rfind("$", 0) == 0);
  CHECK(gd_graph_from_json(nullptr, &g) == GD_ERR_USAGE);

  gd_graph* d7 = build("D7");
  char* out = nullptr;
  CHECK(gd_forward(d7, "100x100x3", 42, 1, "table", &out) == GD_ERR_VALIDATION);
  CHECK(std::string(gd_last_error()).find("not divisible by 128") != std::string::npos);
  CHECK(gd_analyze(d7, "1280x768x3", "yaml", 0, &out) == GD_ERR_USAGE);
  CHECK(gd_analyze(d7, "12x", "table", 0, &out) == GD_ERR_USAGE);
  CHECK(gd_analyze(d7, "1280x768x3", "json", 0, &out) == GD_OK);
  CHECK(std::string(gd_last_error()).empty());
  gd_string_free(out);
  gd_graph_free(d7);
  gd_graph_free(nullptr);
}

TEST_CASE("C API: a cyclic graph document is rejected") {
  const char* doc = R"({"name":"loop","schema_version":1,
    "nodes":[{"id":0,"role":"backbone","op":{"kind":"source","channels":1,"stride":8},"level":3},
             {"id":1,"op":{"kind":"fusion","style":"sum","out_channels":1},"level":3,"layer":1},
             {"id":2,"op":{"kind":"fusion","style":"sum","out_channels":1},"level":3,"layer":2}],
    "edges":[{"src":0,"dst":1},{"src":1,"dst":2},{"src":2,"dst":1}],
    "inputs":[0],"outputs":[2]})";
  gd_graph* g = nullptr;
  CHECK(gd_graph_from_json(doc, &g) == GD_ERR_VALIDATION);
  CHECK(std::string(gd_last_error()).find("cycle") != std::string::npos);
}

TEST_CASE("C API: analyze json agrees with table totals") {
  gd_build_options o;
  gd_build_options_init(&o);
  o.neck = "none";
  gd_graph* g = nullptr;
  REQUIRE(gd_graph_build(&o, &g) == GD_OK);
  char* j = nullptr;
  char* t = nullptr;
  REQUIRE(gd_analyze(g, "1280x768x3", "json", 0, &j) == GD_OK);
  REQUIRE(gd_analyze(g, "1280x768x3", "table", 0, &t) == GD_OK);
  const auto doc = nlohmann::json::parse(take(j));
  const std::string table = take(t);
  const auto total = doc["totals"]["backbone_flops"].get<std::uint64_t>();
  CHECK(total == 3861381120ULL);
  CHECK(table.find("(" + std::to_string(total) + " FLOPs") != std::string::npos);
  CHECK(table.find("3.86G") != std::string::npos);
  gd_graph_free(g);
}

TEST_CASE("C API: forward, gradcheck, topo, family") {
  gd_graph* g = build(nullptr, 1, 8);
  char* a = nullptr;
  char* b = nullptr;
  REQUIRE(gd_forward(g, "random", 7, 1, "json", &a) == GD_OK);
  REQUIRE(gd_forward(g, "random", 7, 2, "json", &b) == GD_OK);
  const auto ja = nlohmann::json::parse(take(a));
  const auto jb = nlohmann::json::parse(take(b));
  CHECK(ja["checksum"] == jb["checksum"]);
  CHECK(ja["outputs"].size() == 5);
  gd_graph_free(g);

  gd_gradcheck_options go;
  gd_gradcheck_options_init(&go);
  go.suite = "primitives";
  int passed = 0;
  char* r = nullptr;
  REQUIRE(gd_gradcheck(&go, "json", &r, &passed) == GD_OK);
  CHECK(passed == 1);
  CHECK(nlohmann::json::parse(take(r))["passed"] == true);
  go.fault = 0.05;
  REQUIRE(gd_gradcheck(&go, "table", &r, &passed) == GD_OK);
  CHECK(passed == 0);
  take(r);
  go.suite = "everything";
  CHECK(gd_gradcheck(&go, "table", &r, &passed) == GD_ERR_USAGE);

  gd_topo_options to;
  gd_topo_options_init(&to);
  to.necks = "fpn,gfpn-dense";
  to.depth = 4;
  REQUIRE(gd_topo(&to, "json", &r) == GD_OK);
  const auto topo = nlohmann::json::parse(take(r));
  CHECK(topo["necks"].size() == 2);
  CHECK(topo["necks"][1]["max_same_level_distance"] == 1);
  to.necks = "fpn,hourglass";
  CHECK(gd_topo(&to, "json", &r) == GD_ERR_USAGE);

  REQUIRE(gd_family(nullptr, "csv", &r) == GD_OK);
  const std::string csv = take(r);
  CHECK(csv.find("D29,29,1.2,29,307") != std::string::npos);
  CHECK(gd_version()[0] != '\0');
}
