#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "giraffe/cost.hpp"
#include "giraffe/gradcheck.hpp"
#include "giraffe/graph.hpp"
#include "giraffe/neck.hpp"
#include "giraffe/scaling.hpp"

namespace giraffe {

enum class ReportFormat { kTable, kJson, kCsv };

ReportFormat parse_report_format(const std::string& s);

/// Input used when "random" is given instead of an explicit shape: the
/// smallest image every default model accepts.
inline constexpr Shape kRandomInputShape{128, 128, 3};
/// Resolution at which family and topology FLOPs are quoted.
inline constexpr Shape kReferenceInputShape{1280, 768, 3};

/// "HxWxC" or "random".
Shape parse_input_spec(const std::string& spec);

std::string format_cost(const CostReport& r, ReportFormat fmt);

struct ForwardOutput {
  NodeId id;
  std::string label;
  std::optional<int> level;
  Shape shape;
  std::uint64_t checksum = 0;
};

struct ForwardSummary {
  std::string graph;
  Shape input;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<ForwardOutput> outputs;
  /// Combines the per-output checksums in output order.
  std::uint64_t combined = 0;
};

/// Random input and weights from `seed`, float execution.
ForwardSummary run_forward(const ArchitectureGraph& g, const Shape& input, std::uint64_t seed,
                           unsigned threads);
std::string format_forward(const ForwardSummary& s, ReportFormat fmt);

std::string format_gradcheck(const std::vector<GradcheckReport>& reports, ReportFormat fmt);

/// Neck name as given on the command line: fpn, panet, bifpn, gfpn,
/// gfpn-none, gfpn-dense, gfpn-log2n.
struct NeckChoice {
  std::string name;
  NeckKind kind = NeckKind::kGfpn;
  SkipMode skip_mode = SkipMode::kLog2n;
};
NeckChoice parse_neck_choice(const std::string& s);

struct TopologyOptions {
  std::vector<std::string> necks{"gfpn-log2n"};
  int depth = 1;
  int width = 256;
  LevelRange levels{};
  /// Re-fit every other neck's width to this neck's FLOPs.
  std::optional<std::string> match_flops;
  Shape input = kReferenceInputShape;
};

struct TopologyRow {
  TopologyReport topology;
  int width = 0;
  std::uint64_t neck_flops = 0;
  std::uint64_t neck_params = 0;
};

/// Neck-only graph on a stub mirroring the S2D taps.
ArchitectureGraph build_neck(const NeckChoice& choice, int depth, int width, const LevelRange& levels);
std::vector<TopologyRow> compare_topologies(const TopologyOptions& opts);
std::string format_topology(const std::vector<TopologyRow>& rows, ReportFormat fmt);

struct FamilyRow {
  FamilyEntry entry;
  std::uint64_t backbone_flops = 0;
  std::uint64_t neck_flops = 0;
  std::uint64_t total_flops = 0;
};

/// Full S2D + GFPN (log2n, concat) model for each family member.
std::vector<FamilyRow> family_rows(const Shape& input = kReferenceInputShape);
std::string format_family(const std::vector<FamilyRow>& rows, const Shape& input, ReportFormat fmt);

}  // namespace giraffe
