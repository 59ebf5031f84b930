#include "embedlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace embedlab {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  const Eigen::Index n = a.rows();
  for (Eigen::Index q = 1; q < n; ++q)
    for (Eigen::Index p = 0; p < q; ++p) sum += a(p, q) * a(p, q);
  return std::sqrt(2.0 * sum);
}

// One Jacobi rotation annihilating a(p, q); a is updated in place, v
// accumulates the rotation on the right.
void rotate(Matrix& a, Matrix& v, Eigen::Index p, Eigen::Index q) {
  const double apq = a(p, q);
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const Eigen::Index n = a.rows();

  for (Eigen::Index k = 0; k < n; ++k) {
    const double akp = a(k, p);
    const double akq = a(k, q);
    a(k, p) = c * akp - s * akq;
    a(k, q) = s * akp + c * akq;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const double apk = a(p, k);
    const double aqk = a(q, k);
    a(p, k) = c * apk - s * aqk;
    a(q, k) = s * apk + c * aqk;
  }
  a(p, q) = 0.0;
  a(q, p) = 0.0;

  for (Eigen::Index k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite())
    throw NumericsError(std::string(what) + ": non-finite matrix entry");
}

}  // namespace

SymmetricEigen sym_eigen(const Matrix& m, double tol) {
  if (m.rows() != m.cols())
    throw DimensionError("sym_eigen: matrix is " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()) + ", not square");
  if (!(tol > 0.0)) throw NumericsError("sym_eigen: tol must be positive");
  require_finite(m, "sym_eigen");

  const Eigen::Index n = m.rows();
  const Matrix sym = 0.5 * (m + m.transpose());
  Matrix a = sym;
  Matrix v = Matrix::Identity(n, n);

  const double scale = a.norm();
  const double target =
      std::numeric_limits<double>::epsilon() * scale * static_cast<double>(std::max<Eigen::Index>(n, 1));
  bool converged = n <= 1 || scale == 0.0;
  for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
    for (Eigen::Index p = 0; p + 1 < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q)
        if (a(p, q) != 0.0) rotate(a, v, p, q);
    converged = off_diagonal_norm(a) <= target;
  }
  if (!converged)
    throw ConvergenceError("sym_eigen: no convergence after " +
                           std::to_string(kJacobiMaxSweeps) + " sweeps");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }

  if (n > 0) {
    const double rho = out.values.cwiseAbs().maxCoeff();
    const double residual =
        max_abs(sym * out.vectors - out.vectors * out.values.asDiagonal());
    if (residual > tol * (1.0 + rho))
      throw ConvergenceError("sym_eigen: residual " + std::to_string(residual) +
                             " exceeds tolerance");
  }
  return out;
}

Inertia inertia_of(std::span<const double> eigenvalues, double zero_tol) {
  Inertia in{0, 0, 0, zero_tol};
  for (double lambda : eigenvalues) {
    if (lambda < -zero_tol)
      ++in.n_neg;
    else if (lambda > zero_tol)
      ++in.n_pos;
    else
      ++in.n_zero;
  }
  return in;
}

Inertia inertia_of(const Vector& eigenvalues, double zero_tol) {
  return inertia_of(std::span<const double>(eigenvalues.data(),
                                            static_cast<std::size_t>(eigenvalues.size())),
                    zero_tol);
}

LeastSquaresResult least_squares_solve(const Matrix& a, const Vector& b) {
  if (a.rows() != b.size())
    throw DimensionError("least_squares_solve: A has " + std::to_string(a.rows()) +
                         " rows but b has " + std::to_string(b.size()) + " entries");
  if (a.cols() == 0) return {Vector(0), b.norm()};
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  Vector x = cod.solve(b);
  return {x, (a * x - b).norm()};
}

std::size_t numeric_rank(const Matrix& a, double tol) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& sv = svd.singularValues();
  const double cut = tol * (sv[0] + 1.0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cut) ++rank;
  return rank;
}

Matrix null_space_basis(const Matrix& a, double tol) {
  const Eigen::Index n = a.cols();
  if (a.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double cut = tol * (sv.size() > 0 ? sv[0] + 1.0 : 1.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cut) ++rank;
  return svd.matrixV().rightCols(n - rank);
}

Vector central_diff_gradient(const ScalarField& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw NumericsError("central_diff_gradient: h must be positive");
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw EvaluationError("central_diff_gradient: non-finite value at coordinate " +
                            std::to_string(i));
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Vector pairwise_sum(std::span<const Vector> values) {
  if (values.empty()) return Vector();
  if (values.size() == 1) return values[0];
  if (values.size() == 2) return values[0] + values[1];
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace embedlab
