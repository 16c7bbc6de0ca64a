#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "giraffe/graph.hpp"
#include "giraffe/tape.hpp"

namespace giraffe {

struct GradcheckOptions {
  double step = 1e-4;        // central-difference half step
  double tolerance = 1e-4;   // max relative error
  /// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
  /// near-zero gradients from amplifying finite-difference noise.
  double magnitude_floor = 1e-6;
  std::uint64_t seed = 42;
  /// Negative control: scales every analytic gradient by (1 + fault).
  double fault = 0.0;
};

struct GradcheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::string suite;
  double tolerance = 0.0;
  std::vector<GradcheckEntry> entries;

  bool passed() const;
  double max_rel_error() const;
};

/// A differentiable double-precision function of some tensors and conv
/// weight blocks. `forward` records onto the tape and returns the outputs;
/// it must call tape.param once per weight block, in order, and report the
/// resulting ids through `param_ids`.
struct GradProblem {
  std::string name;
  std::vector<TensorD> tensors;
  std::vector<std::string> tensor_names;
  std::vector<ConvWeightsD> params;
  std::vector<std::string> param_names;
  std::function<std::vector<VarId>(Tape<double>&, const std::vector<VarId>&, const std::vector<ConvWeightsD>&,
                      std::vector<ParamId>&)>
      forward;
};

/// Compares reverse-mode gradients of sum_i(r_i * output_i), r_i random, against
/// central finite differences for every scalar input and weight.
std::vector<GradcheckEntry> check_problem(const GradProblem& problem, const GradcheckOptions& opts);

/// conv2d, conv1x1, silu, space_to_depth, bilinear_up2, maxpool_down2,
/// concat_channels and sum_tensors on random inputs no larger than 8x8x4.
GradcheckReport gradcheck_primitives(const GradcheckOptions& opts = {});

/// Full graph check: every input tensor and weight block. Shapes must be inferred.
GradcheckReport gradcheck_graph(const ArchitectureGraph& g, const GradcheckOptions& opts = {});

/// Two-level (P3, P4) GFPN, depth 2, width 4, log2n + queen, on a stub whose
/// P3 is 8x8. Shapes already inferred.
ArchitectureGraph tiny_gfpn();

}  // namespace giraffe
