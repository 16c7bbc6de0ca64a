#include "giraffe/tape.hpp"

#include <algorithm>

#include "giraffe/error.hpp"
#include "giraffe/ops.hpp"

namespace giraffe {

template <typename T>
VarId Tape<T>::push_value(BasicTensor<T> v) {
  values_.push_back(std::move(v));
  leaf_requires_grad_.push_back(false);
  is_leaf_.push_back(false);
  return VarId{values_.size() - 1};
}

template <typename T>
void Tape<T>::check(VarId v) const {
  if (v.value >= values_.size()) fail_internal("tape: unknown variable id");
}

template <typename T>
VarId Tape<T>::input(BasicTensor<T> value, bool requires_grad) {
  VarId id = push_value(std::move(value));
  is_leaf_[id.value] = true;
  leaf_requires_grad_[id.value] = requires_grad;
  return id;
}

template <typename T>
ParamId Tape<T>::param(BasicConvWeights<T> weights) {
  params_.push_back(std::move(weights));
  return ParamId{params_.size() - 1};
}

template <typename T>
const BasicTensor<T>& Tape<T>::value(VarId v) const {
  check(v);
  return values_[v.value];
}

template <typename T>
const BasicConvWeights<T>& Tape<T>::param_value(ParamId p) const {
  if (p.value >= params_.size()) fail_internal("tape: unknown parameter id");
  return params_[p.value];
}

template <typename T>
VarId Tape<T>::conv2d(VarId x, ParamId w, int stride, int padding) {
  auto out = giraffe::conv2d(value(x), param_value(w), stride, padding);
  VarId id = push_value(std::move(out));
  entries_.push_back({Op::kConv2d, {x}, id, w, stride, padding, 2});
  return id;
}

template <typename T>
VarId Tape<T>::silu(VarId x) {
  VarId id = push_value(giraffe::silu(value(x)));
  entries_.push_back({Op::kSilu, {x}, id});
  return id;
}

template <typename T>
VarId Tape<T>::space_to_depth(VarId x, int block) {
  VarId id = push_value(giraffe::space_to_depth(value(x), block));
  Entry e{Op::kSpaceToDepth, {x}, id};
  e.block = block;
  entries_.push_back(std::move(e));
  return id;
}

template <typename T>
VarId Tape<T>::bilinear_up2(VarId x) {
  VarId id = push_value(giraffe::bilinear_up2(value(x)));
  entries_.push_back({Op::kUp2, {x}, id});
  return id;
}

template <typename T>
VarId Tape<T>::maxpool_down2(VarId x) {
  VarId id = push_value(giraffe::maxpool_down2(value(x)));
  entries_.push_back({Op::kDown2, {x}, id});
  return id;
}

template <typename T>
VarId Tape<T>::concat(std::span<const VarId> xs) {
  std::vector<BasicTensor<T>> vals;
  vals.reserve(xs.size());
  for (VarId v : xs) vals.push_back(value(v));
  VarId id = push_value(concat_channels<T>(vals));
  entries_.push_back({Op::kConcat, {xs.begin(), xs.end()}, id});
  return id;
}

template <typename T>
VarId Tape<T>::sum(std::span<const VarId> xs) {
  std::vector<BasicTensor<T>> vals;
  vals.reserve(xs.size());
  for (VarId v : xs) vals.push_back(value(v));
  VarId id = push_value(sum_tensors<T>(vals));
  entries_.push_back({Op::kSum, {xs.begin(), xs.end()}, id});
  return id;
}

template <typename T>
struct BackwardPass {
  const Tape<T>& tape;
  std::vector<std::optional<BasicTensor<T>>> grads;
  std::vector<std::optional<BasicConvWeights<T>>> param_grads;

  void accumulate(VarId v, BasicTensor<T> g) {
    auto& slot = grads[v.value];
    if (!slot) {
      slot = std::move(g);
      return;
    }
    auto dst = slot->data();
    const auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  void accumulate_param(ParamId p, BasicConvWeights<T> g) {
    auto& slot = param_grads[p.value];
    if (!slot) {
      slot = std::move(g);
      return;
    }
    for (std::size_t i = 0; i < g.values.size(); ++i) slot->values[i] += g.values[i];
    if (g.bias)
      for (std::size_t i = 0; i < g.bias->size(); ++i) (*slot->bias)[i] += (*g.bias)[i];
  }

  using Entry = typename Tape<T>::Entry;
  using Op = typename Tape<T>::Op;

  void step(const Entry& e) {
    if (!grads[e.output.value]) return;
    const BasicTensor<T> go = *grads[e.output.value];
    switch (e.op) {
      case Op::kConv2d: {
        auto g = conv2d_backward(tape.value(e.inputs[0]), tape.param_value(e.param), e.stride,
                                 e.padding, go);
        accumulate(e.inputs[0], std::move(g.input));
        accumulate_param(e.param, std::move(g.weights));
        break;
      }
      case Op::kSilu:
        accumulate(e.inputs[0], silu_backward(tape.value(e.inputs[0]), go));
        break;
      case Op::kSpaceToDepth:
        accumulate(e.inputs[0], depth_to_space(go, e.block));
        break;
      case Op::kUp2:
        accumulate(e.inputs[0], bilinear_up2_backward(tape.value(e.inputs[0]).shape(), go));
        break;
      case Op::kDown2:
        accumulate(e.inputs[0], maxpool_down2_backward(tape.value(e.inputs[0]), go));
        break;
      case Op::kConcat: {
        std::vector<Shape> shapes;
        for (VarId v : e.inputs) shapes.push_back(tape.value(v).shape());
        auto parts = concat_channels_backward<T>(shapes, go);
        for (std::size_t i = 0; i < e.inputs.size(); ++i)
          accumulate(e.inputs[i], std::move(parts[i]));
        break;
      }
      case Op::kSum:
        for (VarId v : e.inputs) accumulate(v, go);
        break;
    }
  }
};

template <typename T>
Gradients<T> backward(const Tape<T>& tape, VarId output, const BasicTensor<T>& seed) {
  return backward(tape, std::vector<std::pair<VarId, BasicTensor<T>>>{{output, seed}});
}

template <typename T>
Gradients<T> backward(const Tape<T>& tape,
                      const std::vector<std::pair<VarId, BasicTensor<T>>>& seeds) {
  BackwardPass<T> pass{tape, {}, {}};
  pass.grads.resize(tape.values_.size());
  pass.param_grads.resize(tape.params_.size());
  std::size_t last = 0;
  for (const auto& [var, seed] : seeds) {
    const auto& out = tape.value(var);
    if (out.shape() != seed.shape())
      fail_validation("backward: seed shape " + to_string(seed.shape()) +
                      " does not match output " + to_string(out.shape()));
    pass.accumulate(var, seed);
    last = std::max(last, var.value);
  }
  for (auto it = tape.entries_.rbegin(); it != tape.entries_.rend(); ++it) {
    if (it->output.value > last) continue;
    pass.step(*it);
  }

  Gradients<T> result;
  for (std::size_t i = 0; i < tape.values_.size(); ++i) {
    if (!tape.is_leaf_[i] || !tape.leaf_requires_grad_[i]) continue;
    auto& g = pass.grads[i];
    result.inputs.emplace(VarId{i}, g ? std::move(*g) : BasicTensor<T>(tape.values_[i].shape()));
  }
  for (std::size_t i = 0; i < tape.params_.size(); ++i) {
    auto& g = pass.param_grads[i];
    if (g) {
      result.params.emplace(ParamId{i}, std::move(*g));
    } else {
      const auto& p = tape.params_[i];
      BasicConvWeights<T> zero(p.out_channels, p.in_channels, p.kernel_h, p.kernel_w,
                               std::vector<T>(p.values.size(), T(0)));
      if (p.bias) zero.bias.emplace(p.bias->size(), T(0));
      result.params.emplace(ParamId{i}, std::move(zero));
    }
  }
  return result;
}

template class Tape<float>;
template class Tape<double>;
template Gradients<float> backward<float>(const Tape<float>&, VarId, const BasicTensor<float>&);
template Gradients<double> backward<double>(const Tape<double>&, VarId, const BasicTensor<double>&);
template Gradients<float> backward<float>(const Tape<float>&,
                                          const std::vector<std::pair<VarId, BasicTensor<float>>>&);
template Gradients<double> backward<double>(
    const Tape<double>&, const std::vector<std::pair<VarId, BasicTensor<double>>>&);

}  // namespace giraffe
