#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "giraffe/tensor.hpp"

namespace giraffe {

struct VarId {
  std::size_t value = 0;
  friend auto operator<=>(const VarId&, const VarId&) = default;
};

struct ParamId {
  std::size_t value = 0;
  friend auto operator<=>(const ParamId&, const ParamId&) = default;
};

template <typename T>
struct Gradients;

/// Records a single forward pass so gradients can be replayed in reverse.
///
/// Every primitive call evaluates eagerly and appends one entry. Values are
/// kept for the lifetime of the tape because each backward rule needs its
/// forward inputs. A tape is single-writer; build one per forward pass.
template <typename T>
class Tape {
 public:
  VarId input(BasicTensor<T> value, bool requires_grad = true);
  ParamId param(BasicConvWeights<T> weights);

  VarId conv2d(VarId x, ParamId w, int stride, int padding);
  VarId silu(VarId x);
  VarId space_to_depth(VarId x, int block = 2);
  VarId bilinear_up2(VarId x);
  VarId maxpool_down2(VarId x);
  VarId concat(std::span<const VarId> xs);
  VarId sum(std::span<const VarId> xs);

  const BasicTensor<T>& value(VarId v) const;
  const BasicConvWeights<T>& param_value(ParamId p) const;
  std::size_t var_count() const { return values_.size(); }
  std::size_t param_count() const { return params_.size(); }
  std::size_t entry_count() const { return entries_.size(); }

 private:
  enum class Op { kConv2d, kSilu, kSpaceToDepth, kUp2, kDown2, kConcat, kSum };

  struct Entry {
    Op op;
    std::vector<VarId> inputs;
    VarId output;
    ParamId param{};
    int stride = 1;
    int padding = 0;
    int block = 2;
  };

  VarId push_value(BasicTensor<T> v);
  void check(VarId v) const;

  std::vector<BasicTensor<T>> values_;
  std::vector<bool> leaf_requires_grad_;
  std::vector<bool> is_leaf_;
  std::vector<BasicConvWeights<T>> params_;
  std::vector<Entry> entries_;

  template <typename U>
  friend struct BackwardPass;
  template <typename U>
  friend Gradients<U> backward(const Tape<U>&,
                               const std::vector<std::pair<VarId, BasicTensor<U>>>&);
};

template <typename T>
struct Gradients {
  /// Leaf inputs created with requires_grad; zero-filled when unreachable.
  std::map<VarId, BasicTensor<T>> inputs;
  /// Every parameter on the tape.
  std::map<ParamId, BasicConvWeights<T>> params;
};

/// Reverse-mode sweep seeded with d(loss)/d(output) == seed.
template <typename T>
Gradients<T> backward(const Tape<T>& tape, VarId output, const BasicTensor<T>& seed);

/// Same, for a loss that depends on several outputs.
template <typename T>
Gradients<T> backward(const Tape<T>& tape,
                      const std::vector<std::pair<VarId, BasicTensor<T>>>& seeds);

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace giraffe
