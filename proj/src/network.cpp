#include "embedlab/network.hpp"

#include <cmath>
#include <numeric>
#include <span>

namespace embedlab {

namespace {

template <typename T>
T pairwise_total(std::span<const T> items) {
  if (items.size() == 1) return items[0];
  if (items.size() == 2) return items[0] + items[1];
  const std::size_t half = items.size() / 2;
  return pairwise_total(items.first(half)) + pairwise_total(items.subspan(half));
}

void check_input(const ParamTuple& theta, const Vector& x) {
  if (theta.depth() == 0) throw NetworkError("empty parameter tuple");
  if (static_cast<std::size_t>(x.size()) !=
      static_cast<std::size_t>(theta.weight(1).cols()))
    throw DimensionError("input has dimension " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(theta.weight(1).cols()));
}

Vector elementwise(const std::function<double(double)>& fn, const Vector& v) {
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = fn(v[i]);
  return out;
}

// Features and feature gradients for one input; the error slots stay empty.
ForwardTrace forward_pass(const ParamTuple& theta, const Activation& sigma, const Vector& x) {
  check_input(theta, x);
  const std::size_t depth = theta.depth();
  ForwardTrace tr;
  tr.features.resize(depth + 1);
  tr.feature_grads.resize(depth + 1);
  tr.errors.resize(depth + 1);
  tr.hadamard.resize(depth + 1);
  tr.features[0] = x;
  for (std::size_t l = 1; l <= depth; ++l) {
    Vector pre = theta.weight(l) * tr.features[l - 1] + theta.bias(l);
    if (l == depth) {
      tr.features[l] = std::move(pre);
      tr.feature_grads[l] = Vector::Ones(tr.features[l].size());
    } else {
      tr.features[l] = elementwise(sigma.value, pre);
      tr.feature_grads[l] = elementwise(sigma.d1, pre);
    }
  }
  return tr;
}

// Fills z and e from z^[L] = top downwards.
void backward_pass(const ParamTuple& theta, ForwardTrace& tr, const Vector& top) {
  const std::size_t depth = theta.depth();
  tr.errors[depth] = top;
  tr.hadamard[depth] = top;
  for (std::size_t l = depth - 1; l >= 1; --l) {
    tr.errors[l] = theta.weight(l + 1).transpose() * tr.hadamard[l + 1];
    tr.hadamard[l] = tr.errors[l].cwiseProduct(tr.feature_grads[l]);
  }
}

// grad W^[l] = e^[l] f^[l-1]^T, grad b^[l] = e^[l], in vectorization order.
Vector flatten_gradient(const NetShape& shape, const ForwardTrace& tr) {
  Vector out(shape.param_count());
  for (std::size_t l = 1; l <= shape.depth(); ++l) {
    std::size_t k = shape.layer_offset(l);
    const Vector& e = tr.hadamard[l];
    const Vector& f = tr.features[l - 1];
    for (Eigen::Index i = 0; i < e.size(); ++i)
      for (Eigen::Index j = 0; j < f.size(); ++j) out[k++] = e[i] * f[j];
    for (Eigen::Index i = 0; i < e.size(); ++i) out[k++] = e[i];
  }
  return out;
}

void require_second_derivative(const Activation& sigma) {
  if (!sigma.twice_differentiable())
    throw UnsupportedModeError("activation '" + sigma.name +
                               "' is not twice differentiable; Hessian unavailable");
}

}  // namespace

NetShape::NetShape(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 3)
    throw NetworkError("network needs at least 2 layers (3 widths), got " +
                       std::to_string(widths_.size()) + " widths");
  for (std::size_t w : widths_)
    if (w == 0) throw NetworkError("layer widths must be positive");
}

std::size_t NetShape::param_count() const { return layer_offset(depth() + 1); }

std::size_t NetShape::layer_offset(std::size_t l) const {
  std::size_t off = 0;
  for (std::size_t k = 1; k < l; ++k) off += (widths_[k - 1] + 1) * widths_[k];
  return off;
}

std::size_t NetShape::bias_offset(std::size_t l) const {
  return layer_offset(l) + widths_[l] * widths_[l - 1];
}

std::size_t NetShape::hidden_neurons() const {
  return std::accumulate(widths_.begin() + 1, widths_.end() - 1, std::size_t{0});
}

std::string to_string(const NetShape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.widths().size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape.widths()[i]);
  }
  return s + ")";
}

ParamTuple::ParamTuple(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.size() < 2) throw NetworkError("parameter tuple needs at least 2 layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows())
      throw DimensionError("layer " + std::to_string(l + 1) + ": bias length " +
                           std::to_string(layer.bias.size()) + " != weight rows " +
                           std::to_string(layer.weight.rows()));
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows())
      throw DimensionError("layer " + std::to_string(l + 1) + ": weight has " +
                           std::to_string(layer.weight.cols()) + " columns, previous layer has " +
                           std::to_string(layers_[l - 1].weight.rows()) + " neurons");
    if (layer.weight.rows() == 0 || layer.weight.cols() == 0)
      throw DimensionError("layer " + std::to_string(l + 1) + " is empty");
  }
}

ParamTuple ParamTuple::zeros(const NetShape& shape) {
  std::vector<Layer> layers;
  for (std::size_t l = 1; l <= shape.depth(); ++l)
    layers.push_back({Matrix::Zero(shape.width(l), shape.width(l - 1)), Vector::Zero(shape.width(l))});
  return ParamTuple(std::move(layers));
}

ParamTuple ParamTuple::from_vector(const NetShape& shape, const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != shape.param_count())
    throw DimensionError("parameter vector has length " + std::to_string(flat.size()) +
                         ", shape " + to_string(shape) + " needs " +
                         std::to_string(shape.param_count()));
  ParamTuple out = zeros(shape);
  std::size_t k = 0;
  for (std::size_t l = 1; l <= shape.depth(); ++l) {
    Matrix& w = out.weight(l);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = flat[static_cast<Eigen::Index>(k++)];
    Vector& b = out.bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = flat[static_cast<Eigen::Index>(k++)];
  }
  return out;
}

NetShape ParamTuple::shape() const {
  std::vector<std::size_t> widths{static_cast<std::size_t>(layers_.front().weight.cols())};
  for (const Layer& layer : layers_) widths.push_back(static_cast<std::size_t>(layer.weight.rows()));
  return NetShape(std::move(widths));
}

Vector ParamTuple::to_vector() const {
  const NetShape s = shape();
  Vector flat(s.param_count());
  std::size_t k = 0;
  for (const Layer& layer : layers_) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
        flat[static_cast<Eigen::Index>(k++)] = layer.weight(i, j);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
      flat[static_cast<Eigen::Index>(k++)] = layer.bias[i];
  }
  return flat;
}

void Dataset::check(const NetShape& shape) const {
  if (inputs.empty()) throw NetworkError("dataset is empty");
  if (inputs.size() != targets.size())
    throw NetworkError("dataset has " + std::to_string(inputs.size()) + " inputs but " +
                       std::to_string(targets.size()) + " targets");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (static_cast<std::size_t>(inputs[i].size()) != shape.input_dim() ||
        static_cast<std::size_t>(targets[i].size()) != shape.output_dim())
      throw DimensionError("sample " + std::to_string(i) + " does not match shape " +
                           to_string(shape));
  }
}

Vector forward(const ParamTuple& theta, const Activation& sigma, const Vector& x) {
  check_input(theta, x);
  Vector f = x;
  const std::size_t depth = theta.depth();
  for (std::size_t l = 1; l < depth; ++l) f = elementwise(sigma.value, theta.weight(l) * f + theta.bias(l));
  return theta.weight(depth) * f + theta.bias(depth);
}

std::vector<Vector> forward_features(const ParamTuple& theta, const Activation& sigma,
                                     const Vector& x) {
  return forward_pass(theta, sigma, x).features;
}

ForwardTrace forward_trace(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                           const Sample& sample) {
  ForwardTrace tr = forward_pass(theta, sigma, sample.input);
  const Vector& out = tr.features[theta.depth()];
  if (sample.target.size() != out.size())
    throw DimensionError("target has dimension " + std::to_string(sample.target.size()) +
                         ", network output has " + std::to_string(out.size()));
  backward_pass(theta, tr, loss.gradient(out, sample.target));
  return tr;
}

double risk(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
            const Dataset& data) {
  data.check(theta.shape());
  std::vector<double> losses(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    losses[i] = loss.value(forward(theta, sigma, data.inputs[i]), data.targets[i]);
  return pairwise_sum(losses) / static_cast<double>(data.size());
}

Vector gradient(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                const Dataset& data) {
  const NetShape shape = theta.shape();
  data.check(shape);
  std::vector<Vector> per_sample(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    per_sample[i] = flatten_gradient(shape, forward_trace(theta, sigma, loss, data.sample(i)));
  return pairwise_sum(per_sample) / static_cast<double>(data.size());
}

Matrix output_jacobian(const ParamTuple& theta, const Activation& sigma, const Vector& x) {
  const NetShape shape = theta.shape();
  ForwardTrace tr = forward_pass(theta, sigma, x);
  const std::size_t out_dim = shape.output_dim();
  Matrix jac(out_dim, shape.param_count());
  for (std::size_t i = 0; i < out_dim; ++i) {
    backward_pass(theta, tr, Vector::Unit(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(i)));
    jac.row(static_cast<Eigen::Index>(i)) = flatten_gradient(shape, tr).transpose();
  }
  return jac;
}

Vector gradient_via_jacobian(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                             const Dataset& data) {
  data.check(theta.shape());
  std::vector<Vector> terms(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    const Matrix jac = output_jacobian(theta, sigma, data.inputs[s]);
    const Vector dl = loss.gradient(forward(theta, sigma, data.inputs[s]), data.targets[s]);
    terms[s] = jac.transpose() * dl;
  }
  return pairwise_sum(terms) / static_cast<double>(data.size());
}

Matrix gauss_newton_part(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                         const Dataset& data) {
  data.check(theta.shape());
  std::vector<Matrix> terms(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    const Matrix jac = output_jacobian(theta, sigma, data.inputs[s]);
    const Matrix d2 = loss.hessian(forward(theta, sigma, data.inputs[s]), data.targets[s]);
    terms[s] = jac.transpose() * d2 * jac;
  }
  Matrix h1 = pairwise_total<Matrix>(terms) / static_cast<double>(data.size());
  return 0.5 * (h1 + h1.transpose());
}

Matrix hessian_matrix(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                      const Dataset& data, HessianMode mode) {
  require_second_derivative(sigma);
  const NetShape shape = theta.shape();
  data.check(shape);
  const Vector x = theta.to_vector();
  const Eigen::Index m = x.size();
  Matrix h(m, m);

  if (mode == HessianMode::AnalyticH1PlusFd) {
    const double step = kGradientStep;
    Vector probe = x;
    for (Eigen::Index k = 0; k < m; ++k) {
      probe[k] = x[k] + step;
      const Vector up = gradient(ParamTuple::from_vector(shape, probe), sigma, loss, data);
      probe[k] = x[k] - step;
      const Vector down = gradient(ParamTuple::from_vector(shape, probe), sigma, loss, data);
      probe[k] = x[k];
      h.col(k) = (up - down) / (2.0 * step);
    }
  } else {
    const double step = kSecondDifferenceStep;
    auto r = [&](const Vector& v) { return risk(ParamTuple::from_vector(shape, v), sigma, loss, data); };
    const double center = r(x);
    Vector probe = x;
    for (Eigen::Index i = 0; i < m; ++i) {
      probe[i] = x[i] + step;
      const double up = r(probe);
      probe[i] = x[i] - step;
      const double down = r(probe);
      probe[i] = x[i];
      h(i, i) = (up - 2.0 * center + down) / (step * step);
      for (Eigen::Index j = 0; j < i; ++j) {
        double acc = 0.0;
        for (int si : {1, -1})
          for (int sj : {1, -1}) {
            probe[i] = x[i] + si * step;
            probe[j] = x[j] + sj * step;
            acc += si * sj * r(probe);
          }
        probe[i] = x[i];
        probe[j] = x[j];
        h(i, j) = h(j, i) = acc / (4.0 * step * step);
      }
    }
  }
  return 0.5 * (h + h.transpose());
}

HessianReport hessian(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                      const Dataset& data, HessianMode mode, double zero_tol) {
  HessianReport rep;
  rep.full = hessian_matrix(theta, sigma, loss, data, mode);
  rep.h1 = gauss_newton_part(theta, sigma, loss, data);
  rep.h2 = rep.full - rep.h1;
  rep.hidden_params = theta.shape().hidden_param_count();
  rep.eigenvalues = sym_eigen(rep.full).values;
  rep.inertia = inertia_of(rep.eigenvalues, zero_tol);
  return rep;
}

double hessian_quadratic_form(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                              const Dataset& data, const Vector& u) {
  const NetShape shape = theta.shape();
  const Vector x = theta.to_vector();
  if (u.size() != x.size())
    throw DimensionError("direction has length " + std::to_string(u.size()) + ", expected " +
                         std::to_string(x.size()));
  const double norm = u.norm();
  if (norm == 0.0) return 0.0;
  const Vector dir = u / norm;
  const double step = kGradientStep * (1.0 + x.norm());
  const Vector up = gradient(ParamTuple::from_vector(shape, x + step * dir), sigma, loss, data);
  const Vector down = gradient(ParamTuple::from_vector(shape, x - step * dir), sigma, loss, data);
  return norm * norm * dir.dot(up - down) / (2.0 * step);
}

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace embedlab
