#pragma once

// Dense linear algebra and finite-difference kernels shared by every module.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace embedlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public NumericsError {
 public:
  using NumericsError::NumericsError;
};

class ConvergenceError : public NumericsError {
 public:
  using NumericsError::NumericsError;
};

class EvaluationError : public NumericsError {
 public:
  using NumericsError::NumericsError;
};

/// Counts of negative, zero and positive eigenvalues at a given tolerance.
struct Inertia {
  std::size_t n_neg = 0;
  std::size_t n_zero = 0;
  std::size_t n_pos = 0;
  double zero_tolerance = 0.0;

  std::size_t dimension() const { return n_neg + n_zero + n_pos; }
  bool operator==(const Inertia&) const = default;
};

struct SymmetricEigen {
  Vector values;   // ascending
  Matrix vectors;  // column k pairs with values[k]
};

struct LeastSquaresResult {
  Vector solution;
  double residual_norm = 0.0;
};

inline constexpr int kJacobiMaxSweeps = 100;
inline constexpr double kGradientStep = 1e-5;
inline constexpr double kSecondDifferenceStep = 1e-4;

/// Cyclic Jacobi eigensolver. The input is symmetrized as (m + m^T)/2.
/// Throws DimensionError for non-square input and ConvergenceError when the
/// sweep cap is hit or the reconstruction residual exceeds tol * (1 + rho).
SymmetricEigen sym_eigen(const Matrix& m, double tol = 1e-10);

Inertia inertia_of(std::span<const double> eigenvalues, double zero_tol);
Inertia inertia_of(const Vector& eigenvalues, double zero_tol);

/// Minimum-norm least-squares solution via column-pivoted QR with a
/// complete orthogonal completion.
LeastSquaresResult least_squares_solve(const Matrix& a, const Vector& b);

/// Number of singular values greater than tol * (sigma_max + 1).
std::size_t numeric_rank(const Matrix& a, double tol);

/// Orthonormal basis of the null space of `a`, using the same rank rule as
/// numeric_rank. Columns of the result span {x : a x = 0}.
Matrix null_space_basis(const Matrix& a, double tol);

using ScalarField = std::function<double(const Vector&)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
/// Throws EvaluationError if any evaluation is non-finite.
Vector central_diff_gradient(const ScalarField& f, const Vector& x,
                             double h = kGradientStep);

/// Pairwise (cascade) summation; result depends only on the input order.
double pairwise_sum(std::span<const double> values);

/// Element-wise pairwise sum of equally sized vectors.
Vector pairwise_sum(std::span<const Vector> values);

double max_abs(const Matrix& m);

}  // namespace embedlab
