#include "giraffe/ops.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "giraffe/error.hpp"

namespace giraffe {
namespace {

// Runs fn(row_begin, row_end) over [0, rows) on up to `threads` workers.
template <typename Fn>
void for_rows(int rows, unsigned threads, Fn&& fn) {
  const int workers = static_cast<int>(std::clamp<unsigned>(threads, 1u, 64u));
  if (workers == 1 || rows < 2) {
    fn(0, rows);
    return;
  }
  const int n = std::min(workers, rows);
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    const int begin = rows * t / n;
    const int end = rows * (t + 1) / n;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

template <typename T>
void check_shapes_match(std::span<const BasicTensor<T>> inputs, bool channels_too,
                        const char* what) {
  if (inputs.empty()) fail_validation(std::string(what) + ": empty input list");
  const Shape& ref = inputs.front().shape();
  for (const auto& t : inputs) {
    const bool ok = channels_too ? t.shape() == ref : t.shape().spatially_equal(ref);
    if (!ok)
      fail_validation(std::string(what) + ": shape " + to_string(t.shape()) +
                      " does not match " + to_string(ref));
  }
}

}  // namespace

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicConvWeights<T>& w,
                      int stride, int padding, KernelOptions opts) {
  if (stride < 1) fail_validation("conv2d: stride must be positive");
  if (padding < 0) fail_validation("conv2d: padding must be non-negative");
  if (input.channels() != w.in_channels)
    fail_validation("conv2d: input has " + std::to_string(input.channels()) +
                    " channels, filters expect " + std::to_string(w.in_channels));
  const int out_h = conv_output_dim(input.height(), w.kernel_h, stride, padding);
  const int out_w = conv_output_dim(input.width(), w.kernel_w, stride, padding);
  if (out_h < 1 || out_w < 1)
    fail_validation("conv2d: non-positive output extent for input " +
                    to_string(input.shape()));

  const int in_c = w.in_channels;
  const int out_c = w.out_channels;
  // Repack to (ky, kx, ic, oc) so the innermost loop runs over contiguous oc.
  std::vector<T> packed(w.values.size());
  for (int o = 0; o < out_c; ++o)
    for (int i = 0; i < in_c; ++i)
      for (int ky = 0; ky < w.kernel_h; ++ky)
        for (int kx = 0; kx < w.kernel_w; ++kx)
          packed[((static_cast<std::size_t>(ky) * w.kernel_w + kx) * in_c + i) * out_c + o] =
              w.values[w.index(o, i, ky, kx)];

  BasicTensor<T> out(Shape{out_h, out_w, out_c});
  const auto src = input.data();
  auto dst = out.data();
  const int in_h = input.height();
  const int in_w = input.width();

  for_rows(out_h, opts.threads, [&](int row_begin, int row_end) {
    std::vector<T> acc(static_cast<std::size_t>(out_c));
    for (int oy = row_begin; oy < row_end; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        std::fill(acc.begin(), acc.end(), T(0));
        for (int ky = 0; ky < w.kernel_h; ++ky) {
          const int iy = oy * stride + ky - padding;
          if (iy < 0 || iy >= in_h) continue;
          for (int kx = 0; kx < w.kernel_w; ++kx) {
            const int ix = ox * stride + kx - padding;
            if (ix < 0 || ix >= in_w) continue;
            const T* px = &src[(static_cast<std::size_t>(iy) * in_w + ix) * in_c];
            const T* wk = &packed[(static_cast<std::size_t>(ky) * w.kernel_w + kx) * in_c * out_c];
            for (int i = 0; i < in_c; ++i) {
              const T v = px[i];
              const T* wrow = wk + static_cast<std::size_t>(i) * out_c;
              for (int o = 0; o < out_c; ++o) acc[o] += v * wrow[o];
            }
          }
        }
        T* po = &dst[(static_cast<std::size_t>(oy) * out_w + ox) * out_c];
        for (int o = 0; o < out_c; ++o) po[o] = acc[o] + (w.bias ? (*w.bias)[o] : T(0));
      }
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> conv1x1(const BasicTensor<T>& input, const BasicConvWeights<T>& w,
                       KernelOptions opts) {
  if (w.kernel_h != 1 || w.kernel_w != 1)
    fail_validation("conv1x1: filters must be 1x1");
  return conv2d(input, w, 1, 0, opts);
}

template <typename T>
BasicTensor<T> silu(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (T& v : out.data()) v = v * sigmoid(v);
  return out;
}

template <typename T>
BasicTensor<T> space_to_depth(const BasicTensor<T>& input, int block) {
  if (block < 1) fail_validation("space_to_depth: block must be positive");
  if (input.height() % block != 0 || input.width() % block != 0)
    fail_validation("space_to_depth: " + to_string(input.shape()) +
                    " is not divisible by block " + std::to_string(block));
  const int c = input.channels();
  BasicTensor<T> out(Shape{input.height() / block, input.width() / block, c * block * block});
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int dy = 0; dy < block; ++dy)
        for (int dx = 0; dx < block; ++dx)
          for (int ch = 0; ch < c; ++ch)
            out.at(y, x, (dy * block + dx) * c + ch) =
                input.at(y * block + dy, x * block + dx, ch);
  return out;
}

template <typename T>
BasicTensor<T> depth_to_space(const BasicTensor<T>& input, int block) {
  if (block < 1 || input.channels() % (block * block) != 0)
    fail_validation("depth_to_space: channels not divisible by block^2");
  const int c = input.channels() / (block * block);
  BasicTensor<T> out(Shape{input.height() * block, input.width() * block, c});
  for (int y = 0; y < input.height(); ++y)
    for (int x = 0; x < input.width(); ++x)
      for (int dy = 0; dy < block; ++dy)
        for (int dx = 0; dx < block; ++dx)
          for (int ch = 0; ch < c; ++ch)
            out.at(y * block + dy, x * block + dx, ch) =
                input.at(y, x, (dy * block + dx) * c + ch);
  return out;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;  // weight of hi
};

// Half-pixel source coordinate for a x2 upsample, clamped to [0, n-1].
Tap upsample_tap(int i, int n) {
  double s = (i + 0.5) / 2.0 - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(n - 1));
  const int lo = static_cast<int>(std::floor(s));
  const int hi = std::min(lo + 1, n - 1);
  return {lo, hi, s - lo};
}

}  // namespace

template <typename T>
BasicTensor<T> bilinear_up2(const BasicTensor<T>& input) {
  const int h = input.height();
  const int w = input.width();
  const int c = input.channels();
  BasicTensor<T> out(Shape{2 * h, 2 * w, c});
  for (int oy = 0; oy < 2 * h; ++oy) {
    const Tap ty = upsample_tap(oy, h);
    const T fy = static_cast<T>(ty.frac);
    for (int ox = 0; ox < 2 * w; ++ox) {
      const Tap tx = upsample_tap(ox, w);
      const T fx = static_cast<T>(tx.frac);
      for (int ch = 0; ch < c; ++ch) {
        const T top = input.at(ty.lo, tx.lo, ch) * (T(1) - fx) + input.at(ty.lo, tx.hi, ch) * fx;
        const T bot = input.at(ty.hi, tx.lo, ch) * (T(1) - fx) + input.at(ty.hi, tx.hi, ch) * fx;
        out.at(oy, ox, ch) = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> maxpool_down2(const BasicTensor<T>& input) {
  if (input.height() % 2 != 0 || input.width() % 2 != 0)
    fail_validation("maxpool_down2: odd spatial extent " + to_string(input.shape()));
  const int c = input.channels();
  BasicTensor<T> out(Shape{input.height() / 2, input.width() / 2, c});
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int ch = 0; ch < c; ++ch)
        out.at(y, x, ch) = std::max({input.at(2 * y, 2 * x, ch), input.at(2 * y, 2 * x + 1, ch),
                                     input.at(2 * y + 1, 2 * x, ch),
                                     input.at(2 * y + 1, 2 * x + 1, ch)});
  return out;
}

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> inputs) {
  check_shapes_match(inputs, false, "concat_channels");
  int total = 0;
  for (const auto& t : inputs) total += t.channels();
  const Shape& ref = inputs.front().shape();
  BasicTensor<T> out(Shape{ref.height, ref.width, total});
  auto dst = out.data();
  std::size_t pixels = static_cast<std::size_t>(ref.height) * ref.width;
  for (std::size_t p = 0; p < pixels; ++p) {
    std::size_t o = p * total;
    for (const auto& t : inputs) {
      const auto src = t.data();
      const std::size_t c = static_cast<std::size_t>(t.channels());
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(p * c), c,
                  dst.begin() + static_cast<std::ptrdiff_t>(o));
      o += c;
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> sum_tensors(std::span<const BasicTensor<T>> inputs) {
  check_shapes_match(inputs, true, "sum_tensors");
  BasicTensor<T> out = inputs.front();
  auto dst = out.data();
  for (std::size_t k = 1; k < inputs.size(); ++k) {
    const auto src = inputs[k].data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvWeights<T>& w,
                             int stride, int padding, const BasicTensor<T>& grad_out) {
  const int out_h = conv_output_dim(input.height(), w.kernel_h, stride, padding);
  const int out_w = conv_output_dim(input.width(), w.kernel_w, stride, padding);
  if (grad_out.shape() != Shape{out_h, out_w, w.out_channels})
    fail_validation("conv2d_backward: gradient shape " + to_string(grad_out.shape()) +
                    " does not match forward output");
  ConvGrads<T> g{BasicTensor<T>(input.shape()),
                 BasicConvWeights<T>(w.out_channels, w.in_channels, w.kernel_h, w.kernel_w,
                                     std::vector<T>(w.values.size(), T(0)))};
  if (w.bias) g.weights.bias.emplace(static_cast<std::size_t>(w.out_channels), T(0));

  for (int oy = 0; oy < out_h; ++oy)
    for (int ox = 0; ox < out_w; ++ox)
      for (int o = 0; o < w.out_channels; ++o) {
        const T go = grad_out.at(oy, ox, o);
        if (w.bias) (*g.weights.bias)[o] += go;
        for (int ky = 0; ky < w.kernel_h; ++ky) {
          const int iy = oy * stride + ky - padding;
          if (iy < 0 || iy >= input.height()) continue;
          for (int kx = 0; kx < w.kernel_w; ++kx) {
            const int ix = ox * stride + kx - padding;
            if (ix < 0 || ix >= input.width()) continue;
            for (int i = 0; i < w.in_channels; ++i) {
              const std::size_t wi = w.index(o, i, ky, kx);
              g.input.at(iy, ix, i) += w.values[wi] * go;
              g.weights.values[wi] += input.at(iy, ix, i) * go;
            }
          }
        }
      }
  return g;
}

template <typename T>
BasicTensor<T> silu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
  if (input.shape() != grad_out.shape())
    fail_validation("silu_backward: gradient shape mismatch");
  BasicTensor<T> g(input.shape());
  const auto x = input.data();
  const auto go = grad_out.data();
  auto dst = g.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T s = sigmoid(x[i]);
    dst[i] = go[i] * (s + x[i] * s * (T(1) - s));
  }
  return g;
}

template <typename T>
BasicTensor<T> bilinear_up2_backward(const Shape& input_shape, const BasicTensor<T>& grad_out) {
  const int h = input_shape.height;
  const int w = input_shape.width;
  if (grad_out.shape() != Shape{2 * h, 2 * w, input_shape.channels})
    fail_validation("bilinear_up2_backward: gradient shape mismatch");
  BasicTensor<T> g(input_shape);
  for (int oy = 0; oy < 2 * h; ++oy) {
    const Tap ty = upsample_tap(oy, h);
    const T fy = static_cast<T>(ty.frac);
    for (int ox = 0; ox < 2 * w; ++ox) {
      const Tap tx = upsample_tap(ox, w);
      const T fx = static_cast<T>(tx.frac);
      for (int ch = 0; ch < input_shape.channels; ++ch) {
        const T go = grad_out.at(oy, ox, ch);
        g.at(ty.lo, tx.lo, ch) += go * (T(1) - fy) * (T(1) - fx);
        g.at(ty.lo, tx.hi, ch) += go * (T(1) - fy) * fx;
        g.at(ty.hi, tx.lo, ch) += go * fy * (T(1) - fx);
        g.at(ty.hi, tx.hi, ch) += go * fy * fx;
      }
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> maxpool_down2_backward(const BasicTensor<T>& input,
                                      const BasicTensor<T>& grad_out) {
  if (grad_out.shape() != Shape{input.height() / 2, input.width() / 2, input.channels()})
    fail_validation("maxpool_down2_backward: gradient shape mismatch");
  BasicTensor<T> g(input.shape());
  for (int y = 0; y < grad_out.height(); ++y)
    for (int x = 0; x < grad_out.width(); ++x)
      for (int ch = 0; ch < input.channels(); ++ch) {
        // First maximum in raster order receives the gradient.
        int by = 2 * y;
        int bx = 2 * x;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            if (input.at(2 * y + dy, 2 * x + dx, ch) > input.at(by, bx, ch)) {
              by = 2 * y + dy;
              bx = 2 * x + dx;
            }
        g.at(by, bx, ch) += grad_out.at(y, x, ch);
      }
  return g;
}

template <typename T>
std::vector<BasicTensor<T>> concat_channels_backward(std::span<const Shape> input_shapes,
                                                     const BasicTensor<T>& grad_out) {
  int total = 0;
  for (const auto& s : input_shapes) {
    if (!s.spatially_equal(grad_out.shape()))
      fail_validation("concat_channels_backward: spatial mismatch");
    total += s.channels;
  }
  if (total != grad_out.channels())
    fail_validation("concat_channels_backward: channel total mismatch");
  std::vector<BasicTensor<T>> out;
  out.reserve(input_shapes.size());
  int offset = 0;
  for (const auto& s : input_shapes) {
    BasicTensor<T> g(s);
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x)
        for (int c = 0; c < s.channels; ++c) g.at(y, x, c) = grad_out.at(y, x, offset + c);
    offset += s.channels;
    out.push_back(std::move(g));
  }
  return out;
}

#define GIRAFFE_INSTANTIATE_OPS(T)                                                         \
  template T sigmoid<T>(T);                                                                \
  template BasicTensor<T> conv2d<T>(const BasicTensor<T>&, const BasicConvWeights<T>&, int, \
                                    int, KernelOptions);                                   \
  template BasicTensor<T> conv1x1<T>(const BasicTensor<T>&, const BasicConvWeights<T>&,    \
                                     KernelOptions);                                       \
  template BasicTensor<T> silu<T>(const BasicTensor<T>&);                                  \
  template BasicTensor<T> space_to_depth<T>(const BasicTensor<T>&, int);                   \
  template BasicTensor<T> depth_to_space<T>(const BasicTensor<T>&, int);                   \
  template BasicTensor<T> bilinear_up2<T>(const BasicTensor<T>&);                          \
  template BasicTensor<T> maxpool_down2<T>(const BasicTensor<T>&);                         \
  template BasicTensor<T> concat_channels<T>(std::span<const BasicTensor<T>>);             \
  template BasicTensor<T> sum_tensors<T>(std::span<const BasicTensor<T>>);                 \
  template ConvGrads<T> conv2d_backward<T>(const BasicTensor<T>&, const BasicConvWeights<T>&, \
                                           int, int, const BasicTensor<T>&);               \
  template BasicTensor<T> silu_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&);  \
  template BasicTensor<T> bilinear_up2_backward<T>(const Shape&, const BasicTensor<T>&);   \
  template BasicTensor<T> maxpool_down2_backward<T>(const BasicTensor<T>&,                 \
                                                    const BasicTensor<T>&);                \
  template std::vector<BasicTensor<T>> concat_channels_backward<T>(std::span<const Shape>,  \
                                                                   const BasicTensor<T>&);

GIRAFFE_INSTANTIATE_OPS(float)
GIRAFFE_INSTANTIATE_OPS(double)

#undef GIRAFFE_INSTANTIATE_OPS

}  // namespace giraffe
