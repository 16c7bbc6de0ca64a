#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "giraffe/error.hpp"

namespace giraffe {

/// Spatial + channel extent of a feature map, height-major.
struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  bool spatially_equal(const Shape& o) const {
    return height == o.height && width == o.width;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Parses "HxWxC" (case-insensitive 'x'). Throws a usage error on bad input.
Shape parse_shape(const std::string& text);

/// Dense rank-3 feature map stored row-major in (h, w, c) order.
///
/// Construction validates the data length and rejects non-finite values, so a
/// tensor that exists is always well-formed. Tensors are values: copies are
/// deep and nothing mutates them after construction except through data().
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> data);

  const Shape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }

  T at(int y, int x, int c) const { return data_[index(y, x, c)]; }
  T& at(int y, int x, int c) { return data_[index(y, x, c)]; }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * shape_.width + x) * shape_.channels + c;
  }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// Convolution filters in (out, in, kh, kw) order with optional per-output bias.
template <typename T>
struct BasicConvWeights {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  std::vector<T> values;
  std::optional<std::vector<T>> bias;

  BasicConvWeights() = default;
  BasicConvWeights(int out, int in, int kh, int kw, std::vector<T> v,
                   std::optional<std::vector<T>> b = std::nullopt);

  std::size_t index(int o, int i, int ky, int kx) const {
    return ((static_cast<std::size_t>(o) * in_channels + i) * kernel_h + ky) *
               kernel_w + kx;
  }
  std::size_t parameter_count() const {
    return values.size() + (bias ? bias->size() : 0);
  }

  template <typename U>
  BasicConvWeights<U> cast() const {
    std::optional<std::vector<U>> b;
    if (bias) b.emplace(bias->begin(), bias->end());
    return BasicConvWeights<U>(out_channels, in_channels, kernel_h, kernel_w,
                               std::vector<U>(values.begin(), values.end()),
                               std::move(b));
  }

  friend bool operator==(const BasicConvWeights&, const BasicConvWeights&) = default;
};

using ConvWeights = BasicConvWeights<float>;
using ConvWeightsD = BasicConvWeights<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;
extern template struct BasicConvWeights<float>;
extern template struct BasicConvWeights<double>;

}  // namespace giraffe
