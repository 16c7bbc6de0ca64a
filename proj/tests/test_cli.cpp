#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name);
std::string slurp(const fs::path& p);

Run run(const std::string& args, const std::string& env = "") {
  const auto err = scratch("stderr.txt");
  const std::string cmd =
      env + (env.empty() ? "" : " ") + "\"" GIRAFFEDET_PATH "\" " + args + " 2>\"" + err.string() + "\"";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "giraffedet-cli-tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string combined_checksum(const std::string& json_text) {
  return nlohmann::json::parse(json_text)["checksum"].get<std::string>();
}

}  // namespace

TEST_CASE("cli: exit codes") {
  CHECK(run("--help").code == 0);
  CHECK(run("").code == 1);
  CHECK(run("build --bogus").code == 1);
  CHECK(run("build --model D11 --depth 3").code == 1);
  CHECK(run("build --model D12").code == 1);
  CHECK(run("analyze --format yaml").code == 1);
  const auto bad = run("forward --input 100x100x3");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("not divisible by 128") != std::string::npos);
  CHECK(run("build --graph /nonexistent/graph.json").code != 0);
}

TEST_CASE("cli: build writes JSON and a matching DOT file") {
  const auto dot = scratch("d11.dot");
  const auto r = run("build --model D11 --dot " + dot.string());
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["metadata"]["depth"] == "11");
  const std::string text = slurp(dot);
  const std::regex node_re(R"(^  n\d+ \[label=)");
  std::size_t nodes = 0;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) nodes += std::regex_search(line, node_re);
  CHECK(nodes == doc["nodes"].size());

  const auto smoke = run("build --depth 1 --width 8 --skip none");
  REQUIRE(smoke.code == 0);
  const auto small = nlohmann::json::parse(smoke.out);
  CHECK(small["metadata"]["width"] == "8");

  const auto saved = scratch("smoke.json");
  std::ofstream(saved) << smoke.out;
  const auto again = run("build --graph " + saved.string());
  REQUIRE(again.code == 0);
  CHECK(again.out == smoke.out);
}

TEST_CASE("cli: analyze json and table totals agree") {
  const auto j = run("analyze --model D7 --format json");
  const auto t = run("analyze --model D7");
  REQUIRE(j.code == 0);
  REQUIRE(t.code == 0);
  const auto doc = nlohmann::json::parse(j.out);
  const auto backbone = doc["totals"]["backbone_flops"].get<std::uint64_t>();
  CHECK(backbone == 3861381120ULL);
  CHECK(t.out.find("backbone  3.86G  (" + std::to_string(backbone) + " FLOPs") != std::string::npos);
  const auto neck = doc["totals"]["neck_flops"].get<std::uint64_t>();
  CHECK(t.out.find("(" + std::to_string(neck) + " FLOPs") != std::string::npos);

  const auto csv = run("analyze --backbone s2d --neck none --format csv");
  REQUIRE(csv.code == 0);
  CHECK(csv.out.find("3861381120") != std::string::npos);
  const auto empty = run("analyze --backbone stub: --neck none --format json");
  REQUIRE(empty.code == 0);
  CHECK(nlohmann::json::parse(empty.out)["totals"]["total_flops"] == 0);
}

TEST_CASE("cli: forward checksums are stable across runs and thread counts") {
  const std::string args = "forward --depth 2 --width 16 --input random --seed 42 --format json";
  const auto a = run(args);
  const auto b = run(args);
  const auto c = run(args + " --threads 4");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  REQUIRE(c.code == 0);
  CHECK(combined_checksum(a.out) == combined_checksum(b.out));
  CHECK(combined_checksum(a.out) == combined_checksum(c.out));
  CHECK(combined_checksum(a.out) != combined_checksum(run("forward --depth 2 --width 16 --seed 43 --format json").out));
}

TEST_CASE("cli: config file and environment, flags win") {
  const auto cfg = scratch("giraffe.ini");
  std::ofstream(cfg) << "# smoke settings\ndepth=1\nwidth=8\nskip=none\nformat=json\n";
  const auto from_file = run("build --config " + cfg.string());
  REQUIRE(from_file.code == 0);
  CHECK(nlohmann::json::parse(from_file.out)["metadata"]["width"] == "8");

  const auto from_env = run("build", "GIRAFFE_CONFIG=" + cfg.string());
  REQUIRE(from_env.code == 0);
  CHECK(from_env.out == from_file.out);

  const auto overridden = run("build --config " + cfg.string() + " --width 12");
  REQUIRE(overridden.code == 0);
  CHECK(nlohmann::json::parse(overridden.out)["metadata"]["width"] == "12");

  const auto analyze_cfg = scratch("analyze.ini");
  std::ofstream(analyze_cfg) << "neck=none\nformat=json\n[analyze]\nstrict=true\n";
  const auto strict = run("analyze --config " + analyze_cfg.string());
  REQUIRE(strict.code == 0);
  CHECK(nlohmann::json::parse(strict.out)["mode"] == "strict");
}

TEST_CASE("cli: gradcheck, topo and family") {
  const auto ok = run("gradcheck --suite primitives");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("PASS") != std::string::npos);
  const auto bad = run("gradcheck --suite primitives --inject-fault 0.01");
  CHECK(bad.code == 2);
  CHECK(bad.out.find("FAIL") != std::string::npos);

  const auto topo = run("topo --compare fpn,panet,bifpn,gfpn-dense,gfpn-log2n --depth 11");
  REQUIRE(topo.code == 0);
  std::size_t marks = 0;
  for (std::size_t p = topo.out.find("x2 depth"); p != std::string::npos; p = topo.out.find("x2 depth", p + 1)) ++marks;
  CHECK(marks == 2);

  const auto log2n = run("topo --neck gfpn-log2n --depth 29 --format json");
  REQUIRE(log2n.code == 0);
  CHECK(nlohmann::json::parse(log2n.out)["necks"][0]["max_same_level_distance"].get<int>() <= 5);

  const auto fam = run("family list --format json");
  REQUIRE(fam.code == 0);
  CHECK(nlohmann::json::parse(fam.out)["family"].size() == 6);
}
