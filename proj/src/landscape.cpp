#include "embedlab/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace embedlab {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

bool finite(const Vector& v) { return v.allFinite(); }

void scatter(Vector& dst, const std::vector<std::size_t>& pos, const Vector& src, double scale) {
  for (std::size_t k = 0; k < pos.size(); ++k) dst[idx(pos[k])] = scale * src[idx(k)];
}

HessianReport hessian_of(const CriticalPointRecord& point, const Activation& sigma,
                         const LossFn& loss, const Dataset& data) {
  if (point.hessian) return *point.hessian;
  return hessian(point.params, sigma, loss, data, HessianMode::AnalyticH1PlusFd,
                 coupled_zero_tolerance(point.gradient_inf_norm));
}

}  // namespace

std::string to_string(Classification c) {
  switch (c) {
    case Classification::StrictSaddle: return "strict-saddle";
    case Classification::PsdNondegenerate: return "psd-nondegenerate";
    case Classification::PsdDegenerate: return "psd-degenerate";
    case Classification::IndefiniteNonstrictThreshold: return "indefinite-nonstrict-threshold";
  }
  return "unknown";
}

std::string to_string(SaddleCase c) {
  switch (c) {
    case SaddleCase::PositiveRestricted: return "positive-restricted";
    case SaddleCase::NegativeRestricted: return "negative-restricted";
    case SaddleCase::Augmented: return "augmented";
    case SaddleCase::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

std::string to_string(ScreenStatus s) {
  switch (s) {
    case ScreenStatus::Candidate: return "candidate";
    case ScreenStatus::NotCandidate: return "not-candidate";
    case ScreenStatus::AlreadyStrictSaddle: return "already-strict-saddle";
  }
  return "unknown";
}

double coupled_zero_tolerance(double gradient_inf_norm) {
  return std::max(1e-6, 10.0 * gradient_inf_norm);
}

Classification classify(const HessianReport& h, double tau) {
  const Inertia in = inertia_of(h.eigenvalues, tau);
  if (in.n_neg >= 1) return Classification::StrictSaddle;
  if (h.min_eigenvalue() < -1e-2 * tau) return Classification::IndefiniteNonstrictThreshold;
  return in.n_zero > 0 ? Classification::PsdDegenerate : Classification::PsdNondegenerate;
}

ParamTuple random_params(const NetShape& shape, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> draw(0.0, 1.0);
  Vector flat(idx(shape.param_count()));
  for (Index k = 0; k < flat.size(); ++k) flat[k] = scale * draw(rng);
  return ParamTuple::from_vector(shape, flat);
}

ParamTuple newton_polish(const ParamTuple& theta, const Activation& sigma, const LossFn& loss,
                         const Dataset& data, double grad_tol, std::size_t max_steps) {
  const NetShape shape = theta.shape();
  Vector x = theta.to_vector();
  Vector g = gradient(theta, sigma, loss, data);
  double gn = inf_norm(g);
  for (std::size_t step = 0; step < max_steps && gn > grad_tol; ++step) {
    const SymmetricEigen eig = sym_eigen(hessian_matrix(ParamTuple::from_vector(shape, x), sigma, loss, data));
    const double rho = eig.values.cwiseAbs().maxCoeff();
    const double cut = 1e-8 * (1.0 + rho);
    const Vector coeff = eig.vectors.transpose() * g;
    Vector scaled(coeff.size());
    for (Index k = 0; k < coeff.size(); ++k)
      scaled[k] = std::abs(eig.values[k]) > cut ? coeff[k] / eig.values[k] : 0.0;
    const Vector d = -(eig.vectors * scaled);

    bool improved = false;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      const Vector trial = x + t * d;
      const Vector gt = gradient(ParamTuple::from_vector(shape, trial), sigma, loss, data);
      const double tn = inf_norm(gt);
      if (std::isfinite(tn) && tn < gn) {
        x = trial;
        g = gt;
        gn = tn;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return ParamTuple::from_vector(shape, x);
}

CriticalPointRecord descend(const ParamTuple& start, const Activation& sigma, const LossFn& loss,
                            const Dataset& data, const DescentOptions& opt,
                            const DescentObserver& observer) {
  if (!(opt.grad_tol > 0.0)) throw NetworkError("grad_tol must be positive");
  const NetShape shape = start.shape();
  data.check(shape);
  Vector x = start.to_vector();
  CriticalPointRecord rec;
  for (std::size_t it = 0;; ++it) {
    const ParamTuple theta = ParamTuple::from_vector(shape, x);
    const double r = risk(theta, sigma, loss, data);
    const Vector g = gradient(theta, sigma, loss, data);
    const double gn = inf_norm(g);
    if (!std::isfinite(r) || !finite(g))
      throw DivergenceError(it, "risk " + std::to_string(r) + ", gradient not finite");
    if (observer) observer(it, r, gn);
    rec.risk = r;
    rec.gradient_inf_norm = gn;
    rec.iterations = it;
    if (gn <= opt.grad_tol || it >= opt.max_iters || opt.lr == 0.0) break;
    x -= opt.lr * g;
  }
  rec.params = ParamTuple::from_vector(shape, x);

  if (opt.polish && opt.lr != 0.0 && rec.gradient_inf_norm > opt.grad_tol &&
      sigma.twice_differentiable()) {
    rec.params = newton_polish(rec.params, sigma, loss, data, opt.grad_tol, opt.polish_steps);
    rec.risk = risk(rec.params, sigma, loss, data);
    rec.gradient_inf_norm = inf_norm(gradient(rec.params, sigma, loss, data));
  }
  return rec;
}

CriticalPointRecord find_critical(const NetShape& shape, const Activation& sigma,
                                  const LossFn& loss, const Dataset& data,
                                  const DescentOptions& opt, const DescentObserver& observer) {
  return descend(random_params(shape, opt.init_scale, opt.seed), sigma, loss, data, opt, observer);
}

void analyze(CriticalPointRecord& rec, const Activation& sigma, const LossFn& loss,
             const Dataset& data) {
  rec.zero_tolerance = coupled_zero_tolerance(rec.gradient_inf_norm);
  rec.hessian = hessian(rec.params, sigma, loss, data, HessianMode::AnalyticH1PlusFd,
                        rec.zero_tolerance);
  rec.classification = classify(*rec.hessian, rec.zero_tolerance);
}

CriticalPointRecord analyze_point(const ParamTuple& theta, const Activation& sigma,
                                  const LossFn& loss, const Dataset& data) {
  CriticalPointRecord rec;
  rec.params = theta;
  rec.risk = risk(theta, sigma, loss, data);
  rec.gradient_inf_norm = inf_norm(gradient(theta, sigma, loss, data));
  analyze(rec, sigma, loss, data);
  return rec;
}

InertiaComparison inertia_compare(const CriticalPointRecord& narrow, const EmbeddingFn& embedding,
                                  const Activation& sigma, const LossFn& loss,
                                  const Dataset& data) {
  const ParamTuple wide = embedding(narrow.params);
  const double wide_grad = inf_norm(gradient(wide, sigma, loss, data));
  InertiaComparison out;
  out.zero_tolerance = coupled_zero_tolerance(std::max(narrow.gradient_inf_norm, wide_grad));
  const Vector narrow_eigs = narrow.hessian
                                 ? narrow.hessian->eigenvalues
                                 : sym_eigen(hessian_matrix(narrow.params, sigma, loss, data)).values;
  const Vector wide_eigs = sym_eigen(hessian_matrix(wide, sigma, loss, data)).values;
  out.narrow = inertia_of(narrow_eigs, out.zero_tolerance);
  out.wide = inertia_of(wide_eigs, out.zero_tolerance);
  out.monotone = out.wide.n_neg >= out.narrow.n_neg && out.wide.n_zero >= out.narrow.n_zero &&
                 out.wide.n_pos >= out.narrow.n_pos;
  return out;
}

double pullback_identity_check(const ParamTuple& theta, const EmbeddingFn& embedding,
                               const Activation& sigma, const LossFn& loss, const Dataset& data) {
  const AffineMap map = affine_extract(embedding, theta.shape());
  const Matrix hn = hessian_matrix(theta, sigma, loss, data);
  const Matrix hw = hessian_matrix(embedding(theta), sigma, loss, data);
  return max_abs(map.a.transpose() * hw * map.a - hn);
}

bool SaddleConstruction::matches(double rel) const {
  if (kind == SaddleCase::Inconclusive) return false;
  return std::abs(achieved - predicted) <= rel * std::abs(predicted) + 1e-6;
}

SaddleConstruction strict_saddle_construct(const CriticalPointRecord& point,
                                           const Activation& sigma, const LossFn& loss,
                                           const Dataset& data, double h2_tol) {
  const HessianReport h = hessian_of(point, sigma, loss, data);
  const NetShape narrow = point.params.shape();
  const std::size_t hidden = narrow.hidden_param_count();

  SaddleConstruction out;
  out.h2_norm = max_abs(h.h2);
  out.h2_restricted_norm = max_abs(h.restricted_h2());
  out.wide_params = global_threefold(point.params);
  if (out.h2_norm <= h2_tol) return out;

  const NetShape wide = out.wide_params.shape();
  out.direction = Vector::Zero(idx(wide.param_count()));
  const auto copy0 = threefold_hidden_positions(narrow, 0);
  const auto copy1 = threefold_hidden_positions(narrow, 1);
  const auto copy2 = threefold_hidden_positions(narrow, 2);

  if (out.h2_restricted_norm > h2_tol) {
    const SymmetricEigen eig = sym_eigen(h.restricted_h2());
    const double lo = eig.values[0];
    const double hi = eig.values[eig.values.size() - 1];
    if (hi > 0.0 && 0.5 * hi >= -2.0 * lo) {
      out.kind = SaddleCase::PositiveRestricted;
      out.lambda = hi;
      out.narrow_direction = eig.vectors.col(eig.vectors.cols() - 1);
      scatter(out.direction, copy0, out.narrow_direction, 0.5);
      scatter(out.direction, copy1, out.narrow_direction, 0.5);
      scatter(out.direction, copy2, out.narrow_direction, 1.0);
      out.predicted = -0.5 * hi;
    } else {
      out.kind = SaddleCase::NegativeRestricted;
      out.lambda = lo;
      out.narrow_direction = eig.vectors.col(0);
      scatter(out.direction, copy0, out.narrow_direction, 1.0);
      scatter(out.direction, copy1, out.narrow_direction, -1.0);
      out.predicted = 2.0 * lo;
    }
  } else {
    // Augmented block over theta^[L-1] and vec(W^[L]); it has zero trace.
    const std::size_t span = narrow.bias_offset(narrow.depth());
    const SymmetricEigen eig = sym_eigen(h.h2.topLeftCorner(idx(span), idx(span)));
    out.kind = SaddleCase::Augmented;
    out.lambda = eig.values[0];
    out.narrow_direction = eig.vectors.col(0);
    const Vector v_theta = out.narrow_direction.head(idx(hidden));
    const Vector v_w = out.narrow_direction.tail(idx(span - hidden));
    scatter(out.direction, copy0, v_theta, 1.0);
    scatter(out.direction, copy1, v_theta, -1.0);
    scatter(out.direction, threefold_output_weight_positions(narrow, 0), v_w, 1.0);
    scatter(out.direction, threefold_output_weight_positions(narrow, 1), v_w, -1.0);
    out.predicted = 2.0 * out.lambda;
  }

  out.achieved = hessian_quadratic_form(out.wide_params, sigma, loss, data, out.direction);
  if (wide.param_count() <= kMaxDenseWideParams)
    out.wide_min_eigenvalue = sym_eigen(hessian_matrix(out.wide_params, sigma, loss, data)).values[0];
  return out;
}

ScreenResult truly_bad_screen(const CriticalPointRecord& point, const Activation& sigma,
                              const LossFn& loss, const Dataset& data, double h2_tol) {
  const HessianReport h = hessian_of(point, sigma, loss, data);
  ScreenResult out;
  out.zero_tolerance = point.hessian ? point.zero_tolerance
                                     : coupled_zero_tolerance(point.gradient_inf_norm);
  out.h2_norm = max_abs(h.h2);
  out.min_eigenvalue = h.min_eigenvalue();
  if (inertia_of(h.eigenvalues, out.zero_tolerance).n_neg >= 1) {
    out.status = ScreenStatus::AlreadyStrictSaddle;
    return out;
  }
  if (out.h2_norm <= h2_tol) {
    out.status = ScreenStatus::Candidate;
    return out;
  }
  out.status = ScreenStatus::NotCandidate;
  CriticalPointRecord with_h = point;
  with_h.hessian = h;
  out.evidence = strict_saddle_construct(with_h, sigma, loss, data, h2_tol);
  return out;
}

bool DofReport::all_match() const {
  return !rows.empty() &&
         std::all_of(rows.begin(), rows.end(), [](const DofSeedRow& r) { return r.matches; });
}

DofReport dof_verify(const IndexMapping& mapping, std::span<const std::uint64_t> seeds) {
  const NetShape& narrow = mapping.narrow();
  const NetShape& wide = mapping.wide();
  const std::size_t depth = mapping.depth();
  DofReport rep;
  for (std::size_t l = 0; l <= depth; ++l) rep.k_per_layer.push_back(wide.width(l) - narrow.width(l));
  for (std::size_t l = 1; l < depth; ++l) rep.k += rep.k_per_layer[l];
  rep.m_null = mapping.null_count();
  rep.formula_value = rep.k;
  for (std::size_t l = 1; l <= depth; ++l) {
    rep.expected_alpha_nullity.push_back(rep.k_per_layer[l] * rep.k_per_layer[l - 1]);
    rep.formula_value += rep.expected_alpha_nullity.back();
  }
  for (std::size_t l = 1; l < depth; ++l)
    for (std::size_t s = 1; s <= narrow.width(l); ++s) rep.beta_freedom += mapping.group(l, s).size() - 1;
  rep.b_star_freedom = rep.m_null;

  for (std::uint64_t seed : seeds) {
    DofSeedRow row;
    row.seed = seed;
    const BetaCertificate beta = sample_beta(mapping, seed);
    row.total = rep.beta_freedom + rep.b_star_freedom;
    for (std::size_t l = 1; l <= depth; ++l) {
      const AlphaConstraintSystem sys = alpha_constraints(mapping, beta, l);
      const std::size_t nullity =
          static_cast<std::size_t>(sys.matrix.cols()) - numeric_rank(sys.matrix, 1e-10);
      row.alpha_nullity.push_back(nullity);
      row.total += nullity;
    }
    row.matches = row.total == rep.formula_value && row.alpha_nullity == rep.expected_alpha_nullity;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace embedlab
