#pragma once

// Fully-connected networks: parameter tuples, forward evaluation, the
// backprop quantity stack, empirical risk, gradients and the Hessian split
// H = H1 + H2.

#include "embedlab/numerics.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace embedlab {

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedModeError : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

/// Layer widths (m_0, ..., m_L), L >= 2.
class NetShape {
 public:
  NetShape() = default;
  explicit NetShape(std::vector<std::size_t> widths);

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t depth() const { return widths_.size() - 1; }
  std::size_t width(std::size_t l) const { return widths_.at(l); }
  std::size_t input_dim() const { return widths_.front(); }
  std::size_t output_dim() const { return widths_.back(); }

  /// Total parameter count M.
  std::size_t param_count() const;
  /// Offset of W^[l] in the vectorization (1-based layer index). The b^[l]
  /// block starts at layer_offset(l) + m_l * m_{l-1}.
  std::size_t layer_offset(std::size_t l) const;
  std::size_t bias_offset(std::size_t l) const;
  /// Length of theta^[L-1], the prefix of the vectorization that excludes
  /// the last layer.
  std::size_t hidden_param_count() const { return layer_offset(depth()); }
  /// Number of hidden neurons, sum of m_1..m_{L-1}.
  std::size_t hidden_neurons() const;

  bool operator==(const NetShape&) const = default;

 private:
  std::vector<std::size_t> widths_;
};

std::string to_string(const NetShape& shape);

struct Layer {
  Matrix weight;  // m_l x m_{l-1}
  Vector bias;    // m_l
};

/// The 2L-tuple (W^[1], b^[1], ..., W^[L], b^[L]). Layers are addressed with
/// 1-based indices to match the usual layer numbering.
///
/// Vectorization is layer-major; within a layer W is stored row-major and is
/// followed by b.
class ParamTuple {
 public:
  ParamTuple() = default;
  explicit ParamTuple(std::vector<Layer> layers);

  static ParamTuple zeros(const NetShape& shape);
  static ParamTuple from_vector(const NetShape& shape, const Vector& flat);

  NetShape shape() const;
  std::size_t depth() const { return layers_.size(); }

  const Matrix& weight(std::size_t l) const { return layers_.at(l - 1).weight; }
  Matrix& weight(std::size_t l) { return layers_.at(l - 1).weight; }
  const Vector& bias(std::size_t l) const { return layers_.at(l - 1).bias; }
  Vector& bias(std::size_t l) { return layers_.at(l - 1).bias; }
  const std::vector<Layer>& layers() const { return layers_; }

  Vector to_vector() const;

 private:
  std::vector<Layer> layers_;
};

/// Scalar activation with its first and (optionally) second derivative.
struct Activation {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> d1;
  std::function<double(double)> d2;  // empty when not twice differentiable

  bool twice_differentiable() const { return static_cast<bool>(d2); }

  static Activation tanh();
  static Activation sigmoid();
  static Activation softplus();
  static Activation relu();
  /// Throws NetworkError for unknown names.
  static Activation by_name(std::string_view name);
};

/// Loss l(y, y*) with gradient and Hessian in the first argument.
struct LossFn {
  std::string name;
  std::function<double(const Vector&, const Vector&)> value;
  std::function<Vector(const Vector&, const Vector&)> gradient;
  std::function<Matrix(const Vector&, const Vector&)> hessian;

  /// l(y, y*) = ||y - y*||^2, so the gradient is 2 (y - y*) and the Hessian 2 I.
  static LossFn mse();
  /// c * base; used to check that curvature scales with the loss.
  static LossFn scaled(const LossFn& base, double c);
  static LossFn by_name(std::string_view name);
};

struct Sample {
  Vector input;
  Vector target;
};

struct Dataset {
  std::vector<Vector> inputs;
  std::vector<Vector> targets;

  std::size_t size() const { return inputs.size(); }
  Sample sample(std::size_t i) const { return {inputs.at(i), targets.at(i)}; }
  /// Throws NetworkError when empty or when dimensions disagree with `shape`.
  void check(const NetShape& shape) const;
};

/// Per-sample backprop quantities indexed by layer 0..L. Entry 0 of
/// gradients/errors/hadamard is empty; features[0] is the input.
struct ForwardTrace {
  std::vector<Vector> features;        // f^[l]
  std::vector<Vector> feature_grads;   // g^[l] = sigma'(pre-activation), g^[L] = 1
  std::vector<Vector> errors;          // z^[l]
  std::vector<Vector> hadamard;        // e^[l] = z^[l] o g^[l]
};

Vector forward(const ParamTuple& theta, const Activation& sigma, const Vector& x);

/// All feature vectors f^[0..L] for one input.
std::vector<Vector> forward_features(const ParamTuple& theta, const Activation& sigma,
                                     const Vector& x);

ForwardTrace forward_trace(const ParamTuple& theta, const Activation& sigma,
                           const LossFn& loss, const Sample& sample);

double risk(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
            const Dataset& data);

/// Gradient of the empirical risk over the vectorized parameters.
Vector gradient(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                const Dataset& data);

/// m_L x M matrix whose row i is the gradient of output coordinate i.
Matrix output_jacobian(const ParamTuple& theta, const Activation& sigma, const Vector& x);

/// v_S(theta) = sum_i E_S d_i l * grad (f_theta)_i, assembled from the output
/// Jacobian. Algebraically equal to gradient(); kept as an independent route.
Vector gradient_via_jacobian(const ParamTuple& theta, const Activation& sigma,
                             const LossFn& loss, const Dataset& data);

enum class HessianMode {
  AnalyticH1PlusFd,  // H from central differences of the backprop gradient
  FullFd,            // H from second differences of the risk
};

struct HessianReport {
  Matrix full;   // H
  Matrix h1;     // loss-curvature part
  Matrix h2;     // residual-weighted output-curvature part
  std::size_t hidden_params = 0;  // size of the theta^[L-1] block
  Vector eigenvalues;
  Inertia inertia;

  /// Sub-blocks on the theta^[L-1] index range.
  Matrix restricted_full() const { return full.topLeftCorner(hidden_params, hidden_params); }
  Matrix restricted_h1() const { return h1.topLeftCorner(hidden_params, hidden_params); }
  Matrix restricted_h2() const { return h2.topLeftCorner(hidden_params, hidden_params); }
  double min_eigenvalue() const { return eigenvalues.size() ? eigenvalues[0] : 0.0; }
};

inline constexpr double kDefaultZeroTolerance = 1e-6;

/// Throws UnsupportedModeError when sigma has no second derivative.
HessianReport hessian(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                      const Dataset& data, HessianMode mode = HessianMode::AnalyticH1PlusFd,
                      double zero_tol = kDefaultZeroTolerance);

/// Only the assembled matrix H, without eigen-decomposition.
Matrix hessian_matrix(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                      const Dataset& data, HessianMode mode = HessianMode::AnalyticH1PlusFd);

/// H1 = sum_ij E_S d_ij l * grad f_i grad f_j^T.
Matrix gauss_newton_part(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                         const Dataset& data);

/// u^T H u via central differences of the gradient along u.
double hessian_quadratic_form(const ParamTuple& theta, const Activation& sigma,
                              const LossFn& loss, const Dataset& data, const Vector& u);

double inf_norm(const Vector& v);

}  // namespace embedlab
