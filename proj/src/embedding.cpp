#include "embedlab/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace embedlab {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

void check_hidden_layer(const ParamTuple& theta, std::size_t layer) {
  if (layer < 1 || layer >= theta.depth())
    throw EmbeddingError("layer " + std::to_string(layer) + " is not a hidden layer (1.." +
                         std::to_string(theta.depth() - 1) + ")");
}

Matrix append_row(const Matrix& m, const Eigen::RowVectorXd& row) {
  Matrix out(m.rows() + 1, m.cols());
  out.topRows(m.rows()) = m;
  out.row(m.rows()) = row;
  return out;
}

Matrix append_col(const Matrix& m, const Vector& col) {
  Matrix out(m.rows(), m.cols() + 1);
  out.leftCols(m.cols()) = m;
  out.col(m.cols()) = col;
  return out;
}

Vector append(const Vector& v, double x) {
  Vector out(v.size() + 1);
  out.head(v.size()) = v;
  out[v.size()] = x;
  return out;
}

// Rows are samples, columns are the neurons of one layer.
Matrix feature_matrix(const ParamTuple& theta, const Activation& sigma,
                      std::span<const Vector> inputs, std::size_t layer) {
  const auto width = theta.weight(layer).rows();
  Matrix f(idx(inputs.size()), width);
  for (std::size_t s = 0; s < inputs.size(); ++s)
    f.row(idx(s)) = forward_features(theta, sigma, inputs[s])[layer].transpose();
  return f;
}

// Largest residual norm when fitting each column of `target` by [basis, 1].
double span_residual(const Matrix& basis, const Matrix& target) {
  Matrix design(basis.rows(), basis.cols() + 1);
  design << basis, Vector::Ones(basis.rows());
  double worst = 0.0;
  for (Index c = 0; c < target.cols(); ++c)
    worst = std::max(worst, least_squares_solve(design, target.col(c)).residual_norm);
  return worst;
}

}  // namespace

ParamTuple null_embed(const ParamTuple& theta, std::size_t layer, double alpha) {
  check_hidden_layer(theta, layer);
  std::vector<Layer> layers = theta.layers();
  Layer& cur = layers[layer - 1];
  Layer& next = layers[layer];
  cur.weight = append_row(cur.weight, Eigen::RowVectorXd::Zero(cur.weight.cols()));
  cur.bias = append(cur.bias, alpha);
  next.weight = append_col(next.weight, Vector::Zero(next.weight.rows()));
  return ParamTuple(std::move(layers));
}

ParamTuple split_embed(const ParamTuple& theta, std::size_t layer, std::size_t neuron,
                       double alpha) {
  check_hidden_layer(theta, layer);
  const auto width = static_cast<std::size_t>(theta.weight(layer).rows());
  if (neuron < 1 || neuron > width)
    throw EmbeddingError("neuron " + std::to_string(neuron) + " out of range 1.." +
                         std::to_string(width) + " in layer " + std::to_string(layer));
  const Index s = idx(neuron - 1);
  std::vector<Layer> layers = theta.layers();
  Layer& cur = layers[layer - 1];
  Layer& next = layers[layer];
  cur.weight = append_row(cur.weight, cur.weight.row(s));
  cur.bias = append(cur.bias, cur.bias[s]);
  const Vector out_col = next.weight.col(s);
  next.weight = append_col(next.weight, alpha * out_col);
  next.weight.col(s) = (1.0 - alpha) * out_col;
  return ParamTuple(std::move(layers));
}

ParamTuple compose(const ParamTuple& theta, std::span<const EmbeddingStep> steps) {
  ParamTuple cur = theta;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const EmbeddingStep& st = steps[k];
    try {
      cur = st.kind == EmbeddingStep::Kind::Null ? null_embed(cur, st.layer, st.alpha)
                                                 : split_embed(cur, st.layer, st.neuron, st.alpha);
    } catch (const EmbeddingError& e) {
      throw StepError(k, e.what());
    }
  }
  return cur;
}

ParamTuple global_threefold(const ParamTuple& theta) {
  const std::size_t depth = theta.depth();
  std::vector<Layer> layers;
  for (std::size_t l = 1; l <= depth; ++l) {
    const Matrix& w = theta.weight(l);
    const Vector& b = theta.bias(l);
    const Index m = w.rows();
    const Index prev = w.cols();
    if (l == 1) {
      Matrix nw(3 * m, prev);
      nw << w, w, w;
      Vector nb(3 * m);
      nb << b, b, b;
      layers.push_back({nw, nb});
    } else if (l < depth) {
      Matrix nw = Matrix::Zero(3 * m, 3 * prev);
      for (Index p = 0; p < 3; ++p) nw.block(p * m, p * prev, m, prev) = w;
      Vector nb(3 * m);
      nb << b, b, b;
      layers.push_back({nw, nb});
    } else {
      Matrix nw(m, 3 * prev);
      nw << w, w, -w;
      layers.push_back({nw, b});
    }
  }
  return ParamTuple(std::move(layers));
}

ParamTuple general_apply(const ParamTuple& theta, const IndexMapping& mapping,
                         const AlphaSpec& alpha) {
  if (!(theta.shape() == mapping.narrow()))
    throw EmbeddingError("parameters have shape " + to_string(theta.shape()) +
                         ", index mapping expects " + to_string(mapping.narrow()));
  if (!(alpha.values.shape() == mapping.wide()))
    throw EmbeddingError("alpha has shape " + to_string(alpha.values.shape()) +
                         ", index mapping expects " + to_string(mapping.wide()));
  std::vector<Layer> layers;
  for (std::size_t l = 1; l <= mapping.depth(); ++l) {
    const Matrix& wn = theta.weight(l);
    const Vector& bn = theta.bias(l);
    const Matrix& a = alpha.weight(l);
    const Vector& ab = alpha.bias(l);
    Matrix w(a.rows(), a.cols());
    Vector b(a.rows());
    for (Index i = 0; i < a.rows(); ++i) {
      const std::size_t ni = mapping(l, static_cast<std::size_t>(i));
      for (Index j = 0; j < a.cols(); ++j) {
        const std::size_t nj = mapping(l - 1, static_cast<std::size_t>(j));
        const double base = (ni == 0 || nj == 0) ? 1.0 : wn(idx(ni - 1), idx(nj - 1));
        w(i, j) = a(i, j) * base;
      }
      b[i] = ab[i] + (ni == 0 ? 0.0 : bn[idx(ni - 1)]);
    }
    layers.push_back({std::move(w), std::move(b)});
  }
  return ParamTuple(std::move(layers));
}

AffineMap affine_extract(const EmbeddingFn& embedding, const NetShape& narrow) {
  const std::size_t m = narrow.param_count();
  const Vector c = embedding(ParamTuple::zeros(narrow)).to_vector();
  AffineMap map{Matrix(c.size(), idx(m)), c};
  Vector unit = Vector::Zero(idx(m));
  for (std::size_t k = 0; k < m; ++k) {
    unit[idx(k)] = 1.0;
    const Vector col = embedding(ParamTuple::from_vector(narrow, unit)).to_vector();
    unit[idx(k)] = 0.0;
    if (col.size() != c.size()) throw NotAffineError("embedding output size varies with input");
    map.a.col(idx(k)) = col - c;
  }
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> draw(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Vector theta(idx(m));
    for (Index k = 0; k < theta.size(); ++k) theta[k] = draw(rng);
    const Vector image = embedding(ParamTuple::from_vector(narrow, theta)).to_vector();
    if (image.size() != c.size()) throw NotAffineError("embedding output size varies with input");
    const double err = max_abs(image - (map.a * theta + c));
    if (err > kAffineTolerance * (1.0 + max_abs(image)))
      throw NotAffineError("embedding deviates from its affine extraction by " +
                           std::to_string(err));
  }
  return map;
}

double CertificateTraceReport::max_residual() const {
  return std::max({effective_feature, effective_error, null_feature, null_error});
}

CertificateTraceReport check_certificate_trace(const ParamTuple& narrow, const ParamTuple& wide,
                                               const IndexMapping& mapping,
                                               const BetaCertificate& beta,
                                               const EffectiveBiases& b_star,
                                               const Activation& sigma, const LossFn& loss,
                                               const Dataset& data, double tol) {
  if (!(narrow.shape() == mapping.narrow()) || !(wide.shape() == mapping.wide()))
    throw EmbeddingError("parameter shapes do not match the index mapping");
  data.check(narrow.shape());
  CertificateTraceReport rep;
  rep.tolerance = tol;
  const std::size_t depth = mapping.depth();
  std::vector<Vector> first_null_features(depth + 1);

  for (std::size_t s = 0; s < data.size(); ++s) {
    const ForwardTrace tn = forward_trace(narrow, sigma, loss, data.sample(s));
    const ForwardTrace tw = forward_trace(wide, sigma, loss, data.sample(s));
    for (std::size_t l = 1; l <= depth; ++l) {
      if (s == 0) first_null_features[l] = tw.features[l];
      for (std::size_t j = 0; j < mapping.wide().width(l); ++j) {
        const double fw = tw.features[l][idx(j)];
        const double ew = tw.hadamard[l][idx(j)];
        const std::size_t k = mapping(l, j);
        if (k == 0) {
          double spread = std::abs(fw - first_null_features[l][idx(j)]);
          auto it = b_star.values.find({l, j});
          if (it != b_star.values.end())
            spread = std::max(spread, std::abs(fw - sigma.value(it->second)));
          rep.null_feature = std::max(rep.null_feature, spread);
          rep.null_error = std::max(rep.null_error, std::abs(ew));
        } else {
          const double b = l == depth ? 1.0 : beta.layers.at(l)[idx(j)];
          if (std::isnan(b))
            throw MissingCertificateError("beta missing for effective neuron " +
                                          std::to_string(j + 1) + " of layer " + std::to_string(l));
          rep.effective_feature =
              std::max(rep.effective_feature, std::abs(fw - tn.features[l][idx(k - 1)]));
          rep.effective_error =
              std::max(rep.effective_error, std::abs(ew - b * tn.hadamard[l][idx(k - 1)]));
        }
      }
    }
  }
  return rep;
}

double output_preservation_residual(const ParamTuple& narrow, const ParamTuple& wide,
                                    const Activation& sigma, std::span<const Vector> inputs) {
  double worst = 0.0;
  for (const Vector& x : inputs) {
    const Vector yn = forward(narrow, sigma, x);
    const Vector yw = forward(wide, sigma, x);
    if (yn.size() != yw.size()) throw EmbeddingError("networks have different output dimensions");
    for (Index i = 0; i < yn.size(); ++i)
      worst = std::max(worst, std::abs(yw[i] - yn[i]) / (1.0 + std::abs(yn[i])));
  }
  return worst;
}

double representation_residual(const ParamTuple& narrow, const ParamTuple& wide,
                               const Activation& sigma, std::span<const Vector> inputs) {
  if (narrow.depth() != wide.depth()) throw EmbeddingError("networks have different depths");
  double worst = 0.0;
  for (std::size_t l = 1; l <= narrow.depth(); ++l) {
    const Matrix fn = feature_matrix(narrow, sigma, inputs, l);
    const Matrix fw = feature_matrix(wide, sigma, inputs, l);
    worst = std::max({worst, span_residual(fw, fn), span_residual(fn, fw)});
  }
  return worst;
}

}  // namespace embedlab
