#pragma once

// Critical-point analysis on top of the embedding operators: locating
// near-critical points, Hessian inertia comparison across an embedding,
// the affine pull-back identity, strict-saddle constructions through the
// three-fold embedding, truly-bad screening and degree-of-freedom counts.

#include "embedlab/embedding.hpp"
#include "embedlab/network.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace embedlab {

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : std::runtime_error("diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

enum class Classification {
  StrictSaddle,
  PsdNondegenerate,
  PsdDegenerate,
  IndefiniteNonstrictThreshold,  // no eigenvalue below -tau, but some clearly negative ones
};

std::string to_string(Classification c);

struct CriticalPointRecord {
  ParamTuple params;
  double gradient_inf_norm = 0.0;
  double risk = 0.0;
  std::size_t iterations = 0;
  std::optional<HessianReport> hessian;
  double zero_tolerance = kDefaultZeroTolerance;
  std::optional<Classification> classification;
};

/// tau = max(1e-6, 10 * gradient residual).
double coupled_zero_tolerance(double gradient_inf_norm);

Classification classify(const HessianReport& h, double tau);

struct DescentOptions {
  double lr = 0.05;
  std::size_t max_iters = 200000;
  double grad_tol = 1e-8;
  double init_scale = 0.5;
  std::uint64_t seed = 0;
  bool polish = true;
  std::size_t polish_steps = 60;
};

/// Called once per iteration with (iteration, risk, gradient inf-norm).
using DescentObserver = std::function<void(std::size_t, double, double)>;

/// Gaussian initialization with standard deviation `scale`.
ParamTuple random_params(const NetShape& shape, double scale, std::uint64_t seed);

/// Full-batch gradient descent from `start`, then (optionally) Newton polishing
/// with step halving. Throws DivergenceError on non-finite risk or gradient.
CriticalPointRecord descend(const ParamTuple& start, const Activation& sigma, const LossFn& loss,
                            const Dataset& data, const DescentOptions& opt,
                            const DescentObserver& observer = {});

CriticalPointRecord find_critical(const NetShape& shape, const Activation& sigma,
                                  const LossFn& loss, const Dataset& data,
                                  const DescentOptions& opt,
                                  const DescentObserver& observer = {});

/// Newton iterations using a spectrally truncated pseudo-inverse of H.
ParamTuple newton_polish(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                         const Dataset& data, double grad_tol, std::size_t max_steps);

/// Attaches the Hessian, coupled zero tolerance and classification.
void analyze(CriticalPointRecord& rec, const Activation& sigma, const LossFn& loss,
             const Dataset& data);

CriticalPointRecord analyze_point(const ParamTuple& theta, const Activation& sigma,
                                  const LossFn& loss, const Dataset& data);

struct InertiaComparison {
  Inertia narrow;
  Inertia wide;
  double zero_tolerance = 0.0;
  bool monotone = false;
};

InertiaComparison inertia_compare(const CriticalPointRecord& narrow, const EmbeddingFn& embedding,
                                  const Activation& sigma, const LossFn& loss,
                                  const Dataset& data);

/// max |A^T H(A theta + c) A - H(theta)|.
double pullback_identity_check(const ParamTuple& theta, const EmbeddingFn& embedding,
                               const Activation& sigma, const LossFn& loss, const Dataset& data);

enum class SaddleCase {
  PositiveRestricted,  // u = [v/2, v/2, v], prediction -lambda/2
  NegativeRestricted,  // u = [v, -v, 0], prediction 2 lambda
  Augmented,           // zero-trace augmented block, prediction 2 lambda_neg
  Inconclusive,        // H2 vanishes at tolerance
};

std::string to_string(SaddleCase c);

inline constexpr double kDefaultH2Tolerance = 1e-6;
inline constexpr std::size_t kMaxDenseWideParams = 800;

struct SaddleConstruction {
  SaddleCase kind = SaddleCase::Inconclusive;
  double h2_norm = 0.0;             // max |H2|
  double h2_restricted_norm = 0.0;  // max |H2 on theta^[L-1]|
  double lambda = 0.0;              // eigenvalue driving the construction
  Vector narrow_direction;          // unit eigenvector v
  ParamTuple wide_params;
  Vector direction;                 // u over the wide vectorization
  double predicted = 0.0;
  double achieved = 0.0;            // u^T H u from Hessian-vector differences
  std::optional<double> wide_min_eigenvalue;

  /// |achieved - predicted| <= rel * |predicted| + 1e-6.
  bool matches(double rel = 0.1) const;
};

SaddleConstruction strict_saddle_construct(const CriticalPointRecord& point,
                                           const Activation& sigma, const LossFn& loss,
                                           const Dataset& data,
                                           double h2_tol = kDefaultH2Tolerance);

enum class ScreenStatus { Candidate, NotCandidate, AlreadyStrictSaddle };

std::string to_string(ScreenStatus s);

struct ScreenResult {
  ScreenStatus status = ScreenStatus::Candidate;
  double h2_norm = 0.0;
  double min_eigenvalue = 0.0;
  double zero_tolerance = 0.0;
  std::optional<SaddleConstruction> evidence;

  bool candidate() const { return status == ScreenStatus::Candidate; }
};

/// `point` must carry a Hessian (see analyze()).
ScreenResult truly_bad_screen(const CriticalPointRecord& point, const Activation& sigma,
                              const LossFn& loss, const Dataset& data,
                              double h2_tol = kDefaultH2Tolerance);

struct DofSeedRow {
  std::uint64_t seed = 0;
  std::vector<std::size_t> alpha_nullity;  // per layer 1..L
  std::size_t total = 0;
  bool matches = false;
};

struct DofReport {
  std::vector<std::size_t> k_per_layer;  // K_l for l = 0..L
  std::size_t k = 0;                     // sum over hidden layers
  std::size_t m_null = 0;
  std::size_t formula_value = 0;
  std::vector<std::size_t> expected_alpha_nullity;  // K_l K_{l-1}, l = 1..L
  std::size_t beta_freedom = 0;                     // counted from group sizes
  std::size_t b_star_freedom = 0;
  std::vector<DofSeedRow> rows;

  bool all_match() const;
};

DofReport dof_verify(const IndexMapping& mapping, std::span<const std::uint64_t> seeds);

}  // namespace embedlab
