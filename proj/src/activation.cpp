#include "embedlab/network.hpp"

#include <cmath>

namespace embedlab {

namespace {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Activation Activation::tanh() {
  return {"tanh",
          [](double x) { return std::tanh(x); },
          [](double x) {
            const double t = std::tanh(x);
            return 1.0 - t * t;
          },
          [](double x) {
            const double t = std::tanh(x);
            return -2.0 * t * (1.0 - t * t);
          }};
}

Activation Activation::sigmoid() {
  return {"sigmoid",
          logistic,
          [](double x) {
            const double s = logistic(x);
            return s * (1.0 - s);
          },
          [](double x) {
            const double s = logistic(x);
            return s * (1.0 - s) * (1.0 - 2.0 * s);
          }};
}

Activation Activation::softplus() {
  return {"softplus",
          [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
          logistic,
          [](double x) {
            const double s = logistic(x);
            return s * (1.0 - s);
          }};
}

// Not C^2: hessian() refuses it.
Activation Activation::relu() {
  return {"relu",
          [](double x) { return x > 0.0 ? x : 0.0; },
          [](double x) { return x > 0.0 ? 1.0 : 0.0; },
          {}};
}

Activation Activation::by_name(std::string_view name) {
  if (name == "tanh") return tanh();
  if (name == "sigmoid") return sigmoid();
  if (name == "softplus") return softplus();
  if (name == "relu") return relu();
  throw NetworkError("unknown activation '" + std::string(name) + "'");
}

LossFn LossFn::mse() {
  return {"mse",
          [](const Vector& y, const Vector& t) { return (y - t).squaredNorm(); },
          [](const Vector& y, const Vector& t) -> Vector { return 2.0 * (y - t); },
          [](const Vector& y, const Vector&) -> Matrix {
            return 2.0 * Matrix::Identity(y.size(), y.size());
          }};
}

LossFn LossFn::scaled(const LossFn& base, double c) {
  return {base.name + "*" + std::to_string(c),
          [base, c](const Vector& y, const Vector& t) { return c * base.value(y, t); },
          [base, c](const Vector& y, const Vector& t) -> Vector { return c * base.gradient(y, t); },
          [base, c](const Vector& y, const Vector& t) -> Matrix { return c * base.hessian(y, t); }};
}

LossFn LossFn::by_name(std::string_view name) {
  if (name == "mse") return mse();
  throw NetworkError("unknown loss '" + std::string(name) + "'");
}

}  // namespace embedlab
