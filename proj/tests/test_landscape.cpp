#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "common.hpp"
#include "embedlab/landscape.hpp"

#include <cmath>
#include <vector>

using namespace embedlab;
using namespace testing_support;

namespace {

const Activation kTanh = Activation::tanh();
const LossFn kMse = LossFn::mse();

// Three points whose covariance with x vanishes: gradient descent from seed 0
// settles on the constant fit w = 0, a degenerate PSD critical point with
// nonzero residuals.
Dataset bump() { return points({{-1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}}); }

// Output bias at the target mean, everything else zero: exactly critical for
// a two-layer tanh net, and a strict saddle when the residuals correlate with x.
ParamTuple zero_saddle(const NetShape& shape, double mean) {
  ParamTuple t = ParamTuple::zeros(shape);
  t.bias(shape.depth()).setConstant(mean);
  return t;
}

}  // namespace

TEST_CASE("coupled zero tolerance") {
  CHECK(coupled_zero_tolerance(1e-9) == 1e-6);
  CHECK(coupled_zero_tolerance(1e-6) == doctest::Approx(1e-5));
}

TEST_CASE("find_critical converges to zero risk on a realizable set") {
  const NetShape shape({1, 3, 1});
  const ParamTuple teacher = random_params(shape, 0.5, 0);
  Dataset d;
  for (const Vector& x : random_inputs(1, 6, 2)) {
    d.inputs.push_back(x);
    d.targets.push_back(forward(teacher, kTanh, x));
  }
  DescentOptions o;
  o.seed = 0;
  o.init_scale = 0.5;
  const CriticalPointRecord r = find_critical(shape, kTanh, kMse, d, o);
  CHECK(r.risk <= 1e-12);
  CHECK(r.gradient_inf_norm <= 1e-8);
}

TEST_CASE("find_critical on the three-point set reaches grad_tol for seed 0") {
  DescentOptions o;
  o.seed = 0;
  const CriticalPointRecord r = find_critical(NetShape({1, 1, 1}), kTanh, kMse, bump(), o);
  CHECK(r.gradient_inf_norm <= 1e-8);
  CHECK(r.iterations <= 5000);
  CHECK(r.risk == doctest::Approx(2.0 / 9.0).epsilon(1e-9));
}

TEST_CASE("zero learning rate leaves the parameters unchanged") {
  DescentOptions o;
  o.lr = 0.0;
  o.seed = 4;
  const ParamTuple start = random_params(NetShape({1, 2, 1}), o.init_scale, o.seed);
  const CriticalPointRecord r = find_critical(NetShape({1, 2, 1}), kTanh, kMse, s_a(), o);
  CHECK((r.params.to_vector() - start.to_vector()).norm() == 0.0);
  CHECK(r.gradient_inf_norm == inf_norm(gradient(start, kTanh, kMse, s_a())));
}

TEST_CASE("descend reports divergence with the iteration index") {
  DescentOptions o;
  o.lr = 1e6;
  o.max_iters = 1000;
  try {
    descend(theta_a(), kTanh, kMse, points({{0.0, 1e3}, {1.0, -1e3}}), o);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() < 1000);
  }
}

TEST_CASE("classification follows the inertia") {
  const CriticalPointRecord saddle = analyze_point(zero_saddle(NetShape({1, 2, 1}), 0.4), kTanh, kMse, s_a());
  CHECK(saddle.gradient_inf_norm <= 1e-15);
  CHECK(*saddle.classification == Classification::StrictSaddle);
  CHECK(saddle.hessian->inertia.n_neg >= 1);

  DescentOptions o;
  const CriticalPointRecord flat = find_critical(NetShape({1, 1, 1}), kTanh, kMse, bump(), o);
  CriticalPointRecord rec = flat;
  analyze(rec, kTanh, kMse, bump());
  CHECK(*rec.classification == Classification::PsdDegenerate);
}

TEST_CASE("inertia_compare under the identity and a split") {
  const CriticalPointRecord saddle = analyze_point(zero_saddle(NetShape({1, 2, 1}), 0.4), kTanh, kMse, s_a());
  const InertiaComparison id = inertia_compare(saddle, [](const ParamTuple& t) { return t; }, kTanh, kMse, s_a());
  CHECK(id.narrow == id.wide);
  CHECK(id.monotone);

  const InertiaComparison sp = inertia_compare(
      saddle, [](const ParamTuple& t) { return split_embed(t, 1, 1, 0.3); }, kTanh, kMse, s_a());
  CHECK(sp.monotone);
  CHECK(sp.wide.n_neg >= sp.narrow.n_neg);
  CHECK(sp.wide.dimension() == sp.narrow.dimension() + 3);
}

TEST_CASE("inertia_compare under a composed embedding grows the dimension by M' - M") {
  DescentOptions o;
  o.seed = 1;
  const Dataset d = points({{-2.0, 0.3}, {-1.0, -0.4}, {0.0, 0.5}, {1.0, 0.1}, {2.0, -0.6}});
  const CriticalPointRecord c = find_critical(NetShape({1, 2, 1}), kTanh, kMse, d, o);
  REQUIRE(c.gradient_inf_norm <= 1e-8);
  const std::vector<EmbeddingStep> steps{EmbeddingStep::null(1, 0.2), EmbeddingStep::split(1, 1, 0.6)};
  const InertiaComparison cmp =
      inertia_compare(c, [&](const ParamTuple& t) { return compose(t, steps); }, kTanh, kMse, d);
  CHECK(cmp.monotone);
  CHECK(cmp.wide.dimension() == cmp.narrow.dimension() + 6);
  CHECK(cmp.wide.n_zero >= cmp.narrow.n_zero);
}

TEST_CASE("pullback identity holds pointwise") {
  const ParamTuple t = random_params(NetShape({1, 2, 1}), 1.0, 8);
  CHECK(pullback_identity_check(t, [](const ParamTuple& p) { return p; }, kTanh, kMse, s_a()) <= 1e-4);
  CHECK(pullback_identity_check(t, [](const ParamTuple& p) { return null_embed(p, 1, 0.3); }, kTanh, kMse,
                                s_a()) <= 1e-4);
  DescentOptions o;
  const CriticalPointRecord c = find_critical(NetShape({1, 1, 1}), kTanh, kMse, bump(), o);
  CHECK(pullback_identity_check(c.params, [](const ParamTuple& p) { return global_threefold(p); }, kTanh,
                                kMse, bump()) <= 1e-4);
}

TEST_CASE("three-fold position maps agree with the embedded parameters") {
  const NetShape n({2, 3, 2, 1});
  const ParamTuple t = random_params(n, 1.0, 5);
  const Vector w = global_threefold(t).to_vector();
  const Vector v = t.to_vector();
  for (std::size_t p = 0; p < 3; ++p) {
    const std::vector<std::size_t> pos = threefold_hidden_positions(n, p);
    REQUIRE(pos.size() == n.hidden_param_count());
    for (std::size_t k = 0; k < pos.size(); ++k)
      CHECK(w[static_cast<Eigen::Index>(pos[k])] == v[static_cast<Eigen::Index>(k)]);
    const std::vector<std::size_t> out = threefold_output_weight_positions(n, p);
    const double sign = p == 2 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < out.size(); ++k)
      CHECK(w[static_cast<Eigen::Index>(out[k])] ==
            sign * v[static_cast<Eigen::Index>(n.layer_offset(3) + k)]);
  }
}

TEST_CASE("strict_saddle_construct is inconclusive at an interpolating minimum") {
  const double f1 = std::tanh(1.0) - std::tanh(2.0) + 0.5;
  const Dataset d = points({{0.0, 0.5}, {1.0, f1}});
  const CriticalPointRecord c = analyze_point(theta_a(), kTanh, kMse, d);
  const SaddleConstruction s = strict_saddle_construct(c, kTanh, kMse, d);
  CHECK(s.kind == SaddleCase::Inconclusive);
  CHECK(s.h2_norm <= 1e-6);
}

TEST_CASE("strict_saddle_construct at the constant fit with positive restricted curvature") {
  Vector start(4);
  start << 0.3, 0.5, -1.0, 0.8;
  DescentOptions o;
  CriticalPointRecord c = descend(ParamTuple::from_vector(NetShape({1, 1, 1}), start), kTanh, kMse, bump(), o);
  analyze(c, kTanh, kMse, bump());
  REQUIRE(c.gradient_inf_norm <= 1e-8);
  CHECK(c.hessian->min_eigenvalue() >= -c.zero_tolerance);
  const SaddleConstruction s = strict_saddle_construct(c, kTanh, kMse, bump());
  CHECK(s.kind == SaddleCase::PositiveRestricted);
  CHECK(s.h2_restricted_norm > 1e-4);
  CHECK(s.predicted == doctest::Approx(-0.5 * s.lambda));
  CHECK(s.matches());
  REQUIRE(s.wide_min_eigenvalue.has_value());
  CHECK(*s.wide_min_eigenvalue < -1e-6);
  CHECK(s.wide_params.shape() == NetShape({1, 3, 1}));
  const double direct = hessian_quadratic_form(s.wide_params, kTanh, kMse, bump(), s.direction);
  CHECK(direct == doctest::Approx(s.achieved).epsilon(1e-6));
}

TEST_CASE("strict_saddle_construct with negative restricted curvature and loss scaling") {
  DescentOptions o;
  o.seed = 0;
  CriticalPointRecord c = find_critical(NetShape({1, 1, 1}), kTanh, kMse, bump(), o);
  analyze(c, kTanh, kMse, bump());
  const SaddleConstruction s = strict_saddle_construct(c, kTanh, kMse, bump());
  CHECK(s.kind == SaddleCase::NegativeRestricted);
  CHECK(s.predicted == doctest::Approx(2.0 * s.lambda));
  CHECK(s.matches());

  const LossFn scaled = LossFn::scaled(kMse, 3.0);
  CriticalPointRecord c3 = c;
  analyze(c3, kTanh, scaled, bump());
  const SaddleConstruction s3 = strict_saddle_construct(c3, kTanh, scaled, bump());
  CHECK(s3.achieved == doctest::Approx(3.0 * s.achieved).epsilon(1e-4));
}

TEST_CASE("truly_bad_screen outcomes") {
  const double f1 = std::tanh(1.0) - std::tanh(2.0) + 0.5;
  const Dataset fit = points({{0.0, 0.5}, {1.0, f1}});
  const ScreenResult cand = truly_bad_screen(analyze_point(theta_a(), kTanh, kMse, fit), kTanh, kMse, fit);
  CHECK(cand.candidate());
  CHECK(cand.h2_norm <= 1e-6);

  DescentOptions o;
  CriticalPointRecord c = find_critical(NetShape({1, 1, 1}), kTanh, kMse, bump(), o);
  analyze(c, kTanh, kMse, bump());
  const ScreenResult not_cand = truly_bad_screen(c, kTanh, kMse, bump());
  CHECK(not_cand.status == ScreenStatus::NotCandidate);
  REQUIRE(not_cand.evidence.has_value());
  REQUIRE(not_cand.evidence->wide_min_eigenvalue.has_value());
  CHECK(*not_cand.evidence->wide_min_eigenvalue < -not_cand.zero_tolerance);

  const CriticalPointRecord saddle = analyze_point(zero_saddle(NetShape({1, 2, 1}), 0.4), kTanh, kMse, s_a());
  CHECK(truly_bad_screen(saddle, kTanh, kMse, s_a()).status == ScreenStatus::AlreadyStrictSaddle);
}

TEST_CASE("dof_verify on the identity mapping") {
  const std::vector<std::uint64_t> seeds{0, 1};
  const DofReport r = dof_verify(IndexMapping::identity(NetShape({1, 2, 2, 1})), seeds);
  CHECK(r.formula_value == 0);
  for (const DofSeedRow& row : r.rows) {
    CHECK(row.total == 0);
    for (std::size_t n : row.alpha_nullity) CHECK(n == 0);
  }
  CHECK(r.all_match());
}

TEST_CASE("dof_verify on two-layer and three-layer widenings") {
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  const DofReport two = dof_verify(IndexMapping(NetShape({1, 2, 1}), {{1}, {1, 2, 1, 2, 2}, {1}}), seeds);
  CHECK(two.k == 3);
  CHECK(two.formula_value == 3);
  CHECK(two.all_match());

  const DofReport three =
      dof_verify(IndexMapping(NetShape({1, 2, 2, 1}), {{1}, {1, 2, 1}, {1, 2, 1, 2}, {1}}), seeds);
  CHECK(three.k == 3);
  CHECK(three.formula_value == 5);
  CHECK(three.expected_alpha_nullity == std::vector<std::size_t>{0, 2, 0});
  CHECK(three.all_match());
}

TEST_CASE("dof_verify counts B* freedom for null neurons") {
  const std::vector<std::uint64_t> seeds{0, 1};
  const DofReport r = dof_verify(IndexMapping(NetShape({1, 2, 1}), {{1}, {1, 2, 0}, {1}}), seeds);
  CHECK(r.m_null == 1);
  CHECK(r.b_star_freedom == 1);
  CHECK(r.formula_value == 1);
  CHECK(r.all_match());
}
