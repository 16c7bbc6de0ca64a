#pragma once

#include <cstdint>
#include <random>

#include "giraffe/tensor.hpp"
#include "oracles.hpp"

namespace testing {

inline giraffe::TensorD to_tensor(const oracle::Grid& g) {
  return giraffe::TensorD(giraffe::Shape{g.h, g.w, g.c}, g.v);
}

inline oracle::Grid to_grid(const giraffe::TensorD& t) {
  oracle::Grid g(t.height(), t.width(), t.channels());
  const auto d = t.data();
  g.v.assign(d.begin(), d.end());
  return g;
}

inline oracle::Grid random_grid(std::mt19937_64& rng, int h, int w, int c) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  oracle::Grid g(h, w, c);
  for (double& x : g.v) x = u(rng);
  return g;
}

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline double max_abs_diff(const oracle::Grid& a, const oracle::Grid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

}  // namespace testing
