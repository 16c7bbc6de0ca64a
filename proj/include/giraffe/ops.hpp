#pragma once

#include <span>
#include <vector>

#include "giraffe/tensor.hpp"

namespace giraffe {

/// Output extent of a strided, zero-padded convolution along one axis.
/// Returns a value < 1 when the configuration yields no output.
constexpr int conv_output_dim(int input, int kernel, int stride, int padding) {
  const int span = input + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

/// Execution knob shared by the kernels. Work is split across output rows;
/// every output element is reduced in a fixed order, so any thread count
/// gives bit-identical results.
struct KernelOptions {
  unsigned threads = 1;
};

// Forward primitives ---------------------------------------------------------

/// Cross-correlation with zero padding (no kernel flip).
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicConvWeights<T>& w,
                      int stride, int padding, KernelOptions opts = {});

/// 1x1 convolution; rejects weights with a larger kernel.
template <typename T>
BasicTensor<T> conv1x1(const BasicTensor<T>& input, const BasicConvWeights<T>& w,
                       KernelOptions opts = {});

template <typename T>
BasicTensor<T> silu(const BasicTensor<T>& input);

/// Output channel = ((dy * block) + dx) * C + c.
template <typename T>
BasicTensor<T> space_to_depth(const BasicTensor<T>& input, int block = 2);

/// Inverse of space_to_depth under the same channel layout.
template <typename T>
BasicTensor<T> depth_to_space(const BasicTensor<T>& input, int block = 2);

/// x2 bilinear resize, half-pixel centers, coordinates clamped at the border.
template <typename T>
BasicTensor<T> bilinear_up2(const BasicTensor<T>& input);

/// 2x2 / stride 2 max-pooling. Spatial dims must be even.
template <typename T>
BasicTensor<T> maxpool_down2(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> inputs);

template <typename T>
BasicTensor<T> sum_tensors(std::span<const BasicTensor<T>> inputs);

// Vector-Jacobian products -----------------------------------------------------

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicConvWeights<T> weights;  // bias populated iff the forward weights had one
};

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvWeights<T>& w,
                             int stride, int padding, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> silu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> bilinear_up2_backward(const Shape& input_shape,
                                     const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> maxpool_down2_backward(const BasicTensor<T>& input,
                                      const BasicTensor<T>& grad_out);

/// Splits a channel-concatenated gradient back into per-input slices.
template <typename T>
std::vector<BasicTensor<T>> concat_channels_backward(std::span<const Shape> input_shapes,
                                                     const BasicTensor<T>& grad_out);

/// Numerically stable logistic function.
template <typename T>
T sigmoid(T x);

}  // namespace giraffe
