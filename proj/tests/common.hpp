#pragma once

#include "embedlab/network.hpp"

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace testing_support {

using embedlab::Dataset;
using embedlab::Matrix;
using embedlab::NetShape;
using embedlab::ParamTuple;
using embedlab::Vector;

// (1,2,1) tanh net with W1 = [[1],[2]], b1 = 0, W2 = [[1,-1]], b2 = 0.5.
inline ParamTuple theta_a() {
  ParamTuple t = ParamTuple::zeros(NetShape({1, 2, 1}));
  t.weight(1) << 1.0, 2.0;
  t.weight(2) << 1.0, -1.0;
  t.bias(2) << 0.5;
  return t;
}

inline Dataset points(const std::vector<std::pair<double, double>>& xy) {
  Dataset d;
  for (auto [x, y] : xy) {
    d.inputs.push_back(Vector::Constant(1, x));
    d.targets.push_back(Vector::Constant(1, y));
  }
  return d;
}

inline Dataset s_a() { return points({{0.0, 0.5}, {1.0, 0.3}}); }

inline Vector scalar(double x) { return Vector::Constant(1, x); }

inline std::vector<Vector> random_inputs(std::size_t dim, std::size_t count, std::uint64_t seed,
                                         double scale = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vector> xs;
  for (std::size_t i = 0; i < count; ++i) {
    Vector x(static_cast<Eigen::Index>(dim));
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = u(rng);
    xs.push_back(std::move(x));
  }
  return xs;
}

inline Dataset random_dataset(const NetShape& shape, std::size_t count, std::uint64_t seed) {
  Dataset d;
  d.inputs = random_inputs(shape.input_dim(), count, seed);
  d.targets = random_inputs(shape.output_dim(), count, seed + 1, 1.0);
  return d;
}

}  // namespace testing_support
