#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "giraffe/graph.hpp"
#include "giraffe/tape.hpp"
#include "giraffe/tensor.hpp"

namespace giraffe {

/// Parameters owned by one node: the main conv (conv/fusion nodes) and one
/// optional 1x1 projection per in-edge carrying a project transform.
template <typename T>
struct NodeWeights {
  std::optional<BasicConvWeights<T>> conv;
  std::vector<std::optional<BasicConvWeights<T>>> edge_projections;

  friend bool operator==(const NodeWeights&, const NodeWeights&) = default;
};

/// Side table of weights keyed by node, so one topology can be run with
/// many weight draws.
template <typename T>
using WeightTable = std::map<NodeId, NodeWeights<T>>;

/// Counter-based deterministic generator (splitmix64). Output is identical
/// on every platform, unlike the std distributions.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double next_unit();
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

 private:
  std::uint64_t state_;
};

/// Draws every conv weight and bias from U(-1/sqrt(fan_in), +1/sqrt(fan_in)),
/// visiting nodes in topological order. Requires inferred shapes.
template <typename T>
WeightTable<T> init_weights(const ArchitectureGraph& g, std::uint64_t seed);

/// Uniform [-1, 1) tensors for each graph input, in input order.
template <typename T>
std::map<NodeId, BasicTensor<T>> random_inputs(const ArchitectureGraph& g, std::uint64_t seed);

struct ExecOptions {
  /// Worker threads. 1 = strictly serial. Results never depend on this.
  unsigned threads = 1;
};

/// Evaluates every node. Requires inferred shapes and a tensor for each input.
template <typename T>
std::map<NodeId, BasicTensor<T>> execute(const ArchitectureGraph& g,
                                         const std::map<NodeId, BasicTensor<T>>& inputs,
                                         const WeightTable<T>& weights, ExecOptions opts = {});

/// Where each weight block landed on a tape.
struct ParamSlot {
  NodeId node;
  int edge = -1;  // -1 for the node's main conv, otherwise in-edge index
  friend auto operator<=>(const ParamSlot&, const ParamSlot&) = default;
};

template <typename T>
struct TapeRun {
  std::map<NodeId, VarId> values;
  std::map<ParamSlot, ParamId> params;
};

/// Records the forward pass of `g` on `tape`; inputs are tape variables.
template <typename T>
TapeRun<T> execute_on_tape(const ArchitectureGraph& g, Tape<T>& tape,
                           const std::map<NodeId, VarId>& inputs, const WeightTable<T>& weights);

/// Order-independent 64-bit content hash over values rounded to 1e-6.
template <typename T>
std::uint64_t checksum(const BasicTensor<T>& t);

}  // namespace giraffe
