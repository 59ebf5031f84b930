#include "embedlab/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace embedlab {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

void check_alpha_shape(const IndexMapping& mapping, const AlphaSpec& alpha) {
  if (alpha.values.depth() != mapping.depth() || !(alpha.values.shape() == mapping.wide()))
    throw EmbeddingError("alpha has shape " + to_string(alpha.values.shape()) +
                         ", index mapping expects " + to_string(mapping.wide()));
}

double beta_at(const BetaCertificate& beta, std::size_t l, std::size_t j) {
  if (l >= beta.layers.size() || idx(j) >= beta.layers[l].size())
    throw MissingCertificateError("no beta for neuron " + std::to_string(j + 1) + " of layer " +
                                  std::to_string(l));
  const double b = beta.layers[l][idx(j)];
  if (std::isnan(b))
    throw MissingCertificateError("beta missing for effective neuron " + std::to_string(j + 1) +
                                  " of layer " + std::to_string(l));
  return b;
}

void check_beta_shape(const IndexMapping& mapping, const BetaCertificate& beta) {
  if (beta.layers.size() != mapping.depth() + 1)
    throw MissingCertificateError("beta certificate needs " + std::to_string(mapping.depth() + 1) +
                                  " layers, got " + std::to_string(beta.layers.size()));
  for (std::size_t l = 0; l <= mapping.depth(); ++l)
    if (static_cast<std::size_t>(beta.layers[l].size()) != mapping.wide().width(l))
      throw MissingCertificateError("beta layer " + std::to_string(l) + " has " +
                                    std::to_string(beta.layers[l].size()) + " entries, expected " +
                                    std::to_string(mapping.wide().width(l)));
}

// Sum over null inputs j of alpha_ij * sigma(b*_j).
double null_input(const IndexMapping& mapping, const Matrix& a, std::size_t l, std::size_t i,
                  const EffectiveBiases& b_star, const Activation& sigma) {
  double acc = 0.0;
  for (std::size_t j : mapping.group(l - 1, 0)) acc += a(idx(i), idx(j)) * sigma.value(b_star.at(l - 1, j));
  return acc;
}

void bump(double& slot, double value) { slot = std::max(slot, std::abs(value)); }

}  // namespace

double CompatibilityReport::max_residual() const {
  return std::max({forward_effective, forward_null, backward_effective, backward_null,
                   bias_effective, null_to_null, null_to_effective, beta_normalization});
}

CompatibilityReport validate_compatibility(const IndexMapping& mapping, const AlphaSpec& alpha,
                                           const BetaCertificate& beta,
                                           const EffectiveBiases& b_star,
                                           const Activation& sigma, double tol) {
  check_alpha_shape(mapping, alpha);
  check_beta_shape(mapping, beta);
  const NetShape& narrow = mapping.narrow();
  const std::size_t depth = mapping.depth();
  CompatibilityReport rep;
  rep.tolerance = tol;

  for (std::size_t l : {std::size_t{0}, depth})
    for (std::size_t j = 0; j < mapping.wide().width(l); ++j)
      bump(rep.beta_normalization, beta_at(beta, l, j) - 1.0);
  for (std::size_t l = 1; l < depth; ++l)
    for (std::size_t s = 1; s <= narrow.width(l); ++s) {
      double sum = 0.0;
      for (std::size_t j : mapping.group(l, s)) sum += beta_at(beta, l, j);
      bump(rep.beta_normalization, sum - 1.0);
    }

  for (std::size_t l = 1; l <= depth; ++l) {
    const Matrix& a = alpha.weight(l);
    const Vector& ab = alpha.bias(l);
    const std::size_t rows = mapping.wide().width(l);
    const std::size_t cols = mapping.wide().width(l - 1);
    const bool prev_has_nulls = !mapping.group(l - 1, 0).empty();

    for (std::size_t i = 0; i < rows; ++i) {
      const bool null_row = mapping.is_null(l, i);
      for (std::size_t s = 1; s <= narrow.width(l - 1); ++s) {
        double sum = 0.0;
        for (std::size_t j : mapping.group(l - 1, s)) sum += a(idx(i), idx(j));
        if (null_row)
          bump(rep.forward_null, sum);
        else
          bump(rep.forward_effective, sum - 1.0);
      }
      const double bias_sum = null_input(mapping, a, l, i, b_star, sigma) + ab[idx(i)];
      if (null_row) {
        bump(rep.null_to_null, bias_sum - b_star.at(l, i));
      } else {
        if (!prev_has_nulls) bump(rep.bias_effective, ab[idx(i)]);
        bump(rep.null_to_effective, bias_sum);
      }
    }

    for (std::size_t j = 0; j < cols; ++j) {
      const bool null_col = mapping.is_null(l - 1, j);
      for (std::size_t k = 1; k <= narrow.width(l); ++k) {
        double sum = 0.0;
        for (std::size_t i : mapping.group(l, k)) sum += beta_at(beta, l, i) * a(idx(i), idx(j));
        if (null_col)
          bump(rep.backward_null, sum);
        else
          bump(rep.backward_effective, sum - beta_at(beta, l - 1, j));
      }
    }
  }
  return rep;
}

AlphaConstraintSystem alpha_constraints(const IndexMapping& mapping, const BetaCertificate& beta,
                                        std::size_t layer) {
  if (layer < 1 || layer > mapping.depth())
    throw EmbeddingError("layer " + std::to_string(layer) + " out of range 1.." +
                         std::to_string(mapping.depth()));
  check_beta_shape(mapping, beta);
  const NetShape& narrow = mapping.narrow();
  const std::size_t rows = mapping.wide().width(layer);
  const std::size_t cols = mapping.wide().width(layer - 1);
  const std::size_t n_fwd = rows * narrow.width(layer - 1);
  const std::size_t n_bwd = cols * narrow.width(layer);

  AlphaConstraintSystem sys{Matrix::Zero(idx(n_fwd + n_bwd), idx(rows * cols)),
                            Vector::Zero(idx(n_fwd + n_bwd))};
  std::size_t r = 0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t s = 1; s <= narrow.width(layer - 1); ++s, ++r) {
      for (std::size_t j : mapping.group(layer - 1, s)) sys.matrix(idx(r), idx(i * cols + j)) = 1.0;
      sys.rhs[idx(r)] = mapping.is_null(layer, i) ? 0.0 : 1.0;
    }
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t k = 1; k <= narrow.width(layer); ++k, ++r) {
      for (std::size_t i : mapping.group(layer, k))
        sys.matrix(idx(r), idx(i * cols + j)) = beta_at(beta, layer, i);
      sys.rhs[idx(r)] = mapping.is_null(layer - 1, j) ? 0.0 : beta_at(beta, layer - 1, j);
    }
  return sys;
}

BetaCertificate sample_beta(const IndexMapping& mapping, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(0.25, 1.25);
  const std::size_t depth = mapping.depth();
  BetaCertificate beta;
  for (std::size_t l = 0; l <= depth; ++l) {
    Vector b = Vector::Constant(idx(mapping.wide().width(l)), std::numeric_limits<double>::quiet_NaN());
    if (l == 0 || l == depth) {
      b.setOnes();
    } else {
      for (std::size_t s = 1; s <= mapping.narrow().width(l); ++s) {
        const auto& g = mapping.group(l, s);
        for (;;) {
          double sum = 0.0;
          for (std::size_t j : g) sum += (b[idx(j)] = draw(rng));
          bool ok = true;
          for (std::size_t j : g) {
            b[idx(j)] /= sum;
            ok = ok && std::abs(b[idx(j)]) >= kMinBetaMagnitude;
          }
          if (ok) break;
        }
      }
    }
    beta.layers.push_back(std::move(b));
  }
  return beta;
}

SampledEmbedding sample_compatible(const IndexMapping& mapping, const Activation& sigma,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const std::size_t depth = mapping.depth();
  const NetShape& wide = mapping.wide();

  SampledEmbedding out;
  GeneralEmbedding& g = out.embedding;
  g.mapping = mapping;
  g.beta = sample_beta(mapping, rng());

  for (std::size_t l = 1; l < depth; ++l)
    for (std::size_t j : mapping.group(l, 0)) g.b_star.values[{l, j}] = unit(rng);

  std::vector<Layer> layers;
  for (std::size_t l = 1; l <= depth; ++l) {
    const AlphaConstraintSystem sys = alpha_constraints(mapping, g.beta, l);
    const LeastSquaresResult ls = least_squares_solve(sys.matrix, sys.rhs);
    if (ls.residual_norm > 1e-10 * (1.0 + sys.rhs.norm()))
      throw InconsistentConstraintsError("alpha constraints of layer " + std::to_string(l) +
                                         " are inconsistent (residual " +
                                         std::to_string(ls.residual_norm) + ")");
    const Matrix basis = null_space_basis(sys.matrix, 1e-10);
    Vector coeff(basis.cols());
    for (Index k = 0; k < coeff.size(); ++k) coeff[k] = unit(rng);
    const Vector flat = ls.solution + basis * coeff;
    out.alpha_nullity.push_back(static_cast<std::size_t>(basis.cols()));

    const std::size_t rows = wide.width(l);
    const std::size_t cols = wide.width(l - 1);
    Matrix a(idx(rows), idx(cols));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) a(idx(i), idx(j)) = flat[idx(i * cols + j)];
    Vector ab(idx(rows));
    for (std::size_t i = 0; i < rows; ++i) {
      const double target = mapping.is_null(l, i) ? g.b_star.at(l, i) : 0.0;
      ab[idx(i)] = target - null_input(mapping, a, l, i, g.b_star, sigma);
    }
    layers.push_back({std::move(a), std::move(ab)});
  }
  g.alpha = AlphaSpec{ParamTuple(std::move(layers))};
  return out;
}

}  // namespace embedlab
