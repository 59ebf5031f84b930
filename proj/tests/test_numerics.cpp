#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "common.hpp"
#include "embedlab/numerics.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace embedlab;
using namespace testing_support;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

}  // namespace

TEST_CASE("sym_eigen of the identity") {
  const SymmetricEigen e = sym_eigen(Matrix::Identity(3, 3));
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(e.values[i] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sym_eigen of a diagonal matrix returns ascending values") {
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 2.0, -1.0, 0.0;
  const SymmetricEigen e = sym_eigen(d);
  CHECK(e.values[0] == doctest::Approx(-1.0));
  CHECK(std::abs(e.values[1]) < 1e-14);
  CHECK(e.values[2] == doctest::Approx(2.0));
}

TEST_CASE("sym_eigen reconstructs a random symmetric 8x8 matrix") {
  Matrix a = random_matrix(8, 8, 11);
  a = (a + a.transpose()).eval();
  const SymmetricEigen e = sym_eigen(a);
  const Matrix back = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  CHECK(max_abs(back - a) <= 1e-10);
  CHECK(max_abs(e.vectors.transpose() * e.vectors - Matrix::Identity(8, 8)) <= 1e-10);
  for (Eigen::Index i = 1; i < 8; ++i) CHECK(e.values[i - 1] <= e.values[i]);
}

TEST_CASE("sym_eigen rejects non-square and non-finite input") {
  CHECK_THROWS_AS(sym_eigen(Matrix::Zero(2, 3)), DimensionError);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(sym_eigen(bad), NumericsError);
}

TEST_CASE("inertia_of counts against the zero tolerance") {
  CHECK(inertia_of(Vector{{1.0, 1.0, 1.0}}, 1e-8) == Inertia{0, 0, 3, 1e-8});
  CHECK(inertia_of(Vector{{-1.0, 0.0, 2.0}}, 1e-8) == Inertia{1, 1, 1, 1e-8});
  CHECK(inertia_of(Vector{{-1e-9, 1e-9, 5.0}}, 1e-8) == Inertia{0, 2, 1, 1e-8});
}

TEST_CASE("least_squares_solve on identity and overdetermined systems") {
  const Vector b{{0.3, -1.0, 2.0}};
  const LeastSquaresResult id = least_squares_solve(Matrix::Identity(3, 3), b);
  CHECK((id.solution - b).norm() <= 1e-15);
  CHECK(id.residual_norm <= 1e-15);

  Matrix a(2, 1);
  a << 1.0, 1.0;
  const LeastSquaresResult over = least_squares_solve(a, Vector{{0.0, 2.0}});
  CHECK(over.solution[0] == doctest::Approx(1.0));
  CHECK(over.residual_norm == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("least_squares_solve recovers a planted solution") {
  const Matrix a = random_matrix(6, 4, 3);
  const Vector x_star{{0.5, -1.5, 2.0, 0.25}};
  const LeastSquaresResult r = least_squares_solve(a, a * x_star);
  CHECK((r.solution - x_star).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("least_squares_solve returns the minimum-norm solution when rank deficient") {
  Matrix a(1, 2);
  a << 1.0, 1.0;
  const LeastSquaresResult r = least_squares_solve(a, Vector{{2.0}});
  CHECK(r.solution[0] == doctest::Approx(1.0));
  CHECK(r.solution[1] == doctest::Approx(1.0));
}

TEST_CASE("numeric_rank of zero, identity and a planted rank-2 product") {
  CHECK(numeric_rank(Matrix::Zero(4, 3), 1e-10) == 0);
  CHECK(numeric_rank(Matrix::Identity(5, 5), 1e-10) == 5);
  CHECK(numeric_rank(random_matrix(5, 2, 1) * random_matrix(2, 7, 2), 1e-10) == 2);
}

TEST_CASE("null_space_basis spans the kernel") {
  const Matrix a = random_matrix(5, 2, 1) * random_matrix(2, 7, 2);
  const Matrix n = null_space_basis(a, 1e-10);
  CHECK(n.cols() == 5);
  CHECK(max_abs(a * n) <= 1e-10);
  CHECK(max_abs(n.transpose() * n - Matrix::Identity(5, 5)) <= 1e-10);
}

TEST_CASE("central_diff_gradient on constant and quadratic fields") {
  const Vector x{{0.3, -2.0, 1.5}};
  const Vector zero = central_diff_gradient([](const Vector&) { return 4.0; }, x);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  const Vector g = central_diff_gradient([](const Vector& v) { return 0.5 * v.squaredNorm(); }, x);
  CHECK((g - x).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("central_diff_gradient matches backprop on the reference net") {
  const ParamTuple t = theta_a();
  const Activation s = Activation::tanh();
  const LossFn l = LossFn::mse();
  const Dataset d = s_a();
  const NetShape shape = t.shape();
  const Vector fd = central_diff_gradient(
      [&](const Vector& v) { return risk(ParamTuple::from_vector(shape, v), s, l, d); },
      t.to_vector());
  CHECK((fd - gradient(t, s, l, d)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("central_diff_gradient reports non-finite evaluations") {
  CHECK_THROWS_AS(central_diff_gradient([](const Vector& v) { return std::log(v[0]); },
                                        Vector{{0.0}}),
                  EvaluationError);
}

TEST_CASE("pairwise_sum is exact on small integers and order-fixed") {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  CHECK(pairwise_sum(v) == 499500.0);
  CHECK(pairwise_sum(std::span<const double>{}) == 0.0);
  const std::vector<Vector> vs{Vector{{1.0, 2.0}}, Vector{{3.0, 4.0}}, Vector{{5.0, 6.0}}};
  const Vector s = pairwise_sum(vs);
  CHECK(s[0] == 9.0);
  CHECK(s[1] == 12.0);
}
