#include "giraffe/tensor.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "giraffe/error.hpp"

namespace giraffe {

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << s.height << "x" << s.width << "x" << s.channels;
  return os.str();
}

Shape parse_shape(const std::string& text) {
  Shape s;
  int* fields[] = {&s.height, &s.width, &s.channels};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    if (i > 0) {
      if (pos >= text.size() || std::tolower(static_cast<unsigned char>(text[pos])) != 'x')
        fail_usage("shape '" + text + "' must look like HxWxC");
      ++pos;
    }
    std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == start || pos - start > 9)
      fail_usage("shape '" + text + "' must look like HxWxC");
    *fields[i] = std::stoi(text.substr(start, pos - start));
    if (*fields[i] <= 0) fail_usage("shape '" + text + "' has a non-positive extent");
  }
  if (pos != text.size()) fail_usage("shape '" + text + "' must look like HxWxC");
  return s;
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(shape) {
  if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0)
    fail_validation("tensor extents must be positive, got " + to_string(shape));
  if (!std::isfinite(fill)) fail_validation("tensor fill value is not finite");
  data_.assign(shape.numel(), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(shape), data_(std::move(data)) {
  if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0)
    fail_validation("tensor extents must be positive, got " + to_string(shape));
  if (data_.size() != shape.numel())
    fail_validation("tensor data length " + std::to_string(data_.size()) +
                    " does not match shape " + to_string(shape));
  for (T v : data_)
    if (!std::isfinite(v)) fail_validation("tensor contains a non-finite value");
}

template <typename T>
BasicConvWeights<T>::BasicConvWeights(int out, int in, int kh, int kw, std::vector<T> v,
                                      std::optional<std::vector<T>> b)
    : out_channels(out), in_channels(in), kernel_h(kh), kernel_w(kw),
      values(std::move(v)), bias(std::move(b)) {
  if (out <= 0 || in <= 0 || kh <= 0 || kw <= 0)
    fail_validation("convolution weight extents must be positive");
  if (values.size() != static_cast<std::size_t>(out) * in * kh * kw)
    fail_validation("convolution weight length " + std::to_string(values.size()) +
                    " does not match " + std::to_string(out) + "x" + std::to_string(in) +
                    "x" + std::to_string(kh) + "x" + std::to_string(kw));
  if (bias && bias->size() != static_cast<std::size_t>(out))
    fail_validation("bias length does not match output channels");
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template struct BasicConvWeights<float>;
template struct BasicConvWeights<double>;

}  // namespace giraffe
