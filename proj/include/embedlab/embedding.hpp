#pragma once

// Embedding operators from a narrow network into a wider one: one-step null
// and splitting embeddings, their compositions, general compatible
// embeddings given by an index mapping and an alpha tuple, and the
// three-fold global splitting embedding.
//
// Neuron indices that appear in public data (steps, index mappings) are
// 1-based; 0 denotes a null neuron. Index positions inside vectors and
// matrices are 0-based as usual.

#include "embedlab/network.hpp"
#include "embedlab/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace embedlab {

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by compose() when a step does not fit the running shape.
class StepError : public EmbeddingError {
 public:
  StepError(std::size_t step_index, const std::string& what)
      : EmbeddingError("step " + std::to_string(step_index) + ": " + what),
        step_index_(step_index) {}
  std::size_t step_index() const { return step_index_; }

 private:
  std::size_t step_index_;
};

class MissingCertificateError : public EmbeddingError {
 public:
  using EmbeddingError::EmbeddingError;
};

class NotAffineError : public EmbeddingError {
 public:
  using EmbeddingError::EmbeddingError;
};

class InconsistentConstraintsError : public EmbeddingError {
 public:
  using EmbeddingError::EmbeddingError;
};

// --------------------------------------------------------------------------
// One-step embeddings and their composition

ParamTuple null_embed(const ParamTuple& theta, std::size_t layer, double alpha);

/// `neuron` is 1-based.
ParamTuple split_embed(const ParamTuple& theta, std::size_t layer, std::size_t neuron,
                       double alpha);

struct EmbeddingStep {
  enum class Kind { Null, Split };
  Kind kind = Kind::Split;
  std::size_t layer = 1;
  std::size_t neuron = 0;  // 1-based source neuron; 0 for null steps
  double alpha = 0.0;

  static EmbeddingStep null(std::size_t layer, double alpha) { return {Kind::Null, layer, 0, alpha}; }
  static EmbeddingStep split(std::size_t layer, std::size_t neuron, double alpha) {
    return {Kind::Split, layer, neuron, alpha};
  }
};

/// Applies steps in order. Throws StepError naming the first invalid step.
ParamTuple compose(const ParamTuple& theta, std::span<const EmbeddingStep> steps);

/// Three-fold global splitting: hidden layers become block-diagonal copies,
/// the last layer becomes [W, W, -W].
ParamTuple global_threefold(const ParamTuple& theta);

// --------------------------------------------------------------------------
// General compatible embeddings

/// Total pull-back index mapping from wide neuron indices to narrow ones.
class IndexMapping {
 public:
  IndexMapping() = default;
  /// maps[l][j] is the narrow neuron (1-based, 0 = null) that wide neuron j
  /// (0-based position) of layer l pulls back to, for l = 0..L.
  IndexMapping(NetShape narrow, std::vector<std::vector<std::size_t>> maps);

  static IndexMapping identity(const NetShape& narrow);
  static IndexMapping threefold(const NetShape& narrow);

  const NetShape& narrow() const { return narrow_; }
  const NetShape& wide() const { return wide_; }
  std::size_t depth() const { return narrow_.depth(); }
  const std::vector<std::vector<std::size_t>>& maps() const { return maps_; }

  std::size_t operator()(std::size_t l, std::size_t j) const { return maps_.at(l).at(j); }
  bool is_null(std::size_t l, std::size_t j) const { return maps_.at(l).at(j) == 0; }
  /// Wide positions mapping to narrow neuron s (s = 0 gives the null set).
  const std::vector<std::size_t>& group(std::size_t l, std::size_t s) const {
    return groups_.at(l).at(s);
  }
  std::size_t null_count() const;

 private:
  NetShape narrow_;
  NetShape wide_;
  std::vector<std::vector<std::size_t>> maps_;
  std::vector<std::vector<std::vector<std::size_t>>> groups_;
};

/// The alpha tuple (alpha^[l], alpha_b^[l]) over the wide shape.
struct AlphaSpec {
  ParamTuple values;

  const Matrix& weight(std::size_t l) const { return values.weight(l); }
  Matrix& weight(std::size_t l) { return values.weight(l); }
  const Vector& bias(std::size_t l) const { return values.bias(l); }
  Vector& bias(std::size_t l) { return values.bias(l); }
};

/// beta^[l]_j for l = 0..L. Entries at null neurons are NaN and ignored.
struct BetaCertificate {
  std::vector<Vector> layers;
};

/// Effective biases b*^[l]_i, keyed by (layer, 0-based wide position), only
/// for null neurons.
struct EffectiveBiases {
  std::map<std::pair<std::size_t, std::size_t>, double> values;

  /// Throws MissingCertificateError if absent.
  double at(std::size_t l, std::size_t j) const;
};

/// Complete data of a general compatible embedding.
struct GeneralEmbedding {
  IndexMapping mapping;
  AlphaSpec alpha;
  BetaCertificate beta;
  EffectiveBiases b_star;
};

/// W'_ij = alpha_ij * (W_narr)_{I(i), I(j)}, b'_i = alpha_b,i + (b_narr)_{I(i)}
/// with the zero-index convention (W)_{0j} = (W)_{i0} = 1, (b)_0 = 0.
ParamTuple general_apply(const ParamTuple& theta, const IndexMapping& mapping,
                         const AlphaSpec& alpha);

inline ParamTuple general_apply(const ParamTuple& theta, const GeneralEmbedding& g) {
  return general_apply(theta, g.mapping, g.alpha);
}

/// Max-abs residuals of every compatibility condition.
struct CompatibilityReport {
  double forward_effective = 0.0;   // sum over a group = 1 into effective rows
  double forward_null = 0.0;        // sum over a group = 0 into null rows
  double backward_effective = 0.0;  // sum_i beta_i alpha_ij = beta_j
  double backward_null = 0.0;       // sum_i beta_i alpha_ij = 0 for null j
  double bias_effective = 0.0;      // alpha_b = 0 on effective rows ...
  double null_to_null = 0.0;        // null inputs reproduce b* on null rows
  double null_to_effective = 0.0;   // ... and cancel on effective rows
  double beta_normalization = 0.0;  // beta^[0] = beta^[L] = 1, group sums = 1
  double tolerance = 0.0;

  double max_residual() const;
  bool passed() const { return max_residual() <= tolerance; }
};

/// Checks the forward/backward conditions on alpha and the bias conditions
/// on alpha_b. bias_effective covers effective rows whose previous layer has
/// no null neurons (alpha_b must vanish there); rows that do receive
/// constant null inputs are covered by null_to_effective, where alpha_b
/// carries the cancelling correction.
CompatibilityReport validate_compatibility(const IndexMapping& mapping, const AlphaSpec& alpha,
                                           const BetaCertificate& beta,
                                           const EffectiveBiases& b_star,
                                           const Activation& sigma, double tol);

inline CompatibilityReport validate_compatibility(const GeneralEmbedding& g,
                                                  const Activation& sigma, double tol) {
  return validate_compatibility(g.mapping, g.alpha, g.beta, g.b_star, sigma, tol);
}

/// Linear forward/backward weight conditions on alpha^[l] for a fixed beta,
/// unknowns in row-major order over the wide alpha^[l].
struct AlphaConstraintSystem {
  Matrix matrix;
  Vector rhs;
};

AlphaConstraintSystem alpha_constraints(const IndexMapping& mapping, const BetaCertificate& beta,
                                        std::size_t layer);

struct SampledEmbedding {
  GeneralEmbedding embedding;
  std::vector<std::size_t> alpha_nullity;  // per layer 1..L (index l-1)
};

inline constexpr double kMinBetaMagnitude = 1e-3;

/// Draws generic beta with unit group sums, solves the weight conditions for
/// alpha (minimum-norm solution plus a random null-space component), draws
/// B* in [-1, 1] and solves the bias conditions for alpha_b.
SampledEmbedding sample_compatible(const IndexMapping& mapping, const Activation& sigma,
                                   std::uint64_t seed);

/// Generic beta: positive draws renormalized to unit group sums.
BetaCertificate sample_beta(const IndexMapping& mapping, std::uint64_t seed);

// General presentations of the concrete operators.
GeneralEmbedding present_identity(const NetShape& narrow);
GeneralEmbedding present_null(const NetShape& narrow, std::size_t layer, double alpha);
GeneralEmbedding present_split(const NetShape& narrow, std::size_t layer, std::size_t neuron,
                               double alpha);
GeneralEmbedding present_steps(const NetShape& narrow, std::span<const EmbeddingStep> steps);
GeneralEmbedding present_threefold(const NetShape& narrow);

/// Wide positions of copy p (0, 1, 2) of theta^[L-1] inside a three-fold
/// embedded parameter vector, in narrow vectorization order.
std::vector<std::size_t> threefold_hidden_positions(const NetShape& narrow, std::size_t copy);
/// Wide positions of the W^[L] columns belonging to copy p, in narrow order
/// of vec(W^[L]).
std::vector<std::size_t> threefold_output_weight_positions(const NetShape& narrow,
                                                           std::size_t copy);

// --------------------------------------------------------------------------
// Affine structure and verification helpers

using EmbeddingFn = std::function<ParamTuple(const ParamTuple&)>;

struct AffineMap {
  Matrix a;  // M' x M
  Vector c;  // M'
};

inline constexpr double kAffineTolerance = 1e-10;

/// c = vec(T(0)), column k of A = vec(T(e_k)) - c; verified on 5 random
/// points, otherwise NotAffineError.
AffineMap affine_extract(const EmbeddingFn& embedding, const NetShape& narrow);

struct CertificateTraceReport {
  double effective_feature = 0.0;  // |f_wide_j - f_narr_I(j)|
  double effective_error = 0.0;    // |e_wide_j - beta_j e_narr_I(j)|
  double null_feature = 0.0;       // spread across samples and |f - sigma(b*)|
  double null_error = 0.0;         // |e_wide_j|
  double tolerance = 0.0;

  double max_residual() const;
  bool passed() const { return max_residual() <= tolerance; }
};

CertificateTraceReport check_certificate_trace(const ParamTuple& narrow, const ParamTuple& wide,
                                               const IndexMapping& mapping,
                                               const BetaCertificate& beta,
                                               const EffectiveBiases& b_star,
                                               const Activation& sigma, const LossFn& loss,
                                               const Dataset& data, double tol);

/// max |f_wide(x) - f_narr(x)| / (1 + |f_narr(x)|) over the given inputs.
double output_preservation_residual(const ParamTuple& narrow, const ParamTuple& wide,
                                    const Activation& sigma, std::span<const Vector> inputs);

/// Largest least-squares residual when each layer's feature columns (over
/// the sample inputs) of one network are fitted by the other's plus the
/// constant function, in both directions.
double representation_residual(const ParamTuple& narrow, const ParamTuple& wide,
                               const Activation& sigma, std::span<const Vector> inputs);

}  // namespace embedlab
