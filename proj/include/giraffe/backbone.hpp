#pragma once

#include <map>
#include <utility>
#include <vector>

#include "giraffe/graph.hpp"

namespace giraffe {

/// Space-to-depth chain: two strided 3x3 stem convs followed by five
/// [space_to_depth -> 1x1 conv] blocks, each block emitting one pyramid level.
struct S2DChainConfig {
  std::pair<int, int> stem_channels{32, 64};
  std::vector<int> stage_channels{128, 256, 512, 1024, 2048};
  bool activation = true;
};

/// Source-only backbone stand-in: one node per level with a declared width.
struct PyramidStubConfig {
  std::map<int, int> level_channels;
  /// Defaults to 2^k when a level is absent.
  std::map<int, int> level_strides;
};

/// One backbone feature that a neck can attach to.
struct PyramidLevel {
  int level = 0;
  int channels = 0;
  friend bool operator==(const PyramidLevel&, const PyramidLevel&) = default;
};
using Pyramid = std::vector<PyramidLevel>;

/// First pyramid level emitted by the S2D chain (stride 8).
inline constexpr int kS2DFirstLevel = 3;

ArchitectureGraph build_s2d_chain(const S2DChainConfig& cfg = {});
ArchitectureGraph build_pyramid_stub(const PyramidStubConfig& cfg);

/// Stub whose widths match the default S2D chain taps (P3..P7).
PyramidStubConfig default_stub_config();

/// Parses "3=128,4=256,..." into a stub config.
PyramidStubConfig parse_stub_spec(const std::string& spec);

/// Levels and widths of a backbone's outputs, ascending by level.
Pyramid pyramid_of(const ArchitectureGraph& backbone);

/// Attaches `neck` to `backbone`: every source node of the neck is replaced by
/// the backbone output at the same level. Outputs become the neck's outputs.
ArchitectureGraph compose(const ArchitectureGraph& backbone, const ArchitectureGraph& neck);

}  // namespace giraffe
