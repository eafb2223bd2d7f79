#pragma once

#include <Eigen/Dense>

#include <vector>

#include "pfcred/error.hpp"

namespace pfcred {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigendecomposition of a symmetric matrix with eigenvalues in descending
/// order. Column j of `vectors` pairs with `values[j]`, and each column is
/// signed so that its entry of largest magnitude is nonnegative (ties go to
/// the lowest index).
struct SymEigen {
  Vector values;
  Matrix vectors;
};

/// A d-dimensional subspace of R^p held as a p x d orthonormal basis.
class Subspace {
 public:
  Subspace() = default;

  /// Orthonormalized span of the columns of `spanning`, which must have full
  /// column rank. Column order is preserved (Gram-Schmidt order) and the
  /// largest-entry sign convention is applied to each basis column.
  static Subspace span_of(const Matrix& spanning);

  int dim() const { return static_cast<int>(basis_.cols()); }
  int ambient() const { return static_cast<int>(basis_.rows()); }
  const Matrix& basis() const { return basis_; }

 private:
  Matrix basis_;
};

enum class SymPower { Half, NegHalf, Inverse };

SymEigen eig_sym_desc(const Matrix& a);

/// V diag(values^e) V^T. Eigenvalues in [-tol, 0] are clipped to zero and more
/// negative ones raise NotPSD. Negative exponents need every eigenvalue above
/// tol, where tol = rel_tol * (largest eigenvalue).
Matrix sym_power(const Matrix& a, SymPower exponent, double rel_tol = 1e-10);

/// Span of A^{-1/2} times the first d eigenvectors of A^{-1/2} B A^{-1/2}.
Subspace sd_subspace(const Matrix& a, const Matrix& b, int d);

/// Principal angles (radians, ascending) between two subspaces of equal
/// dimension in the same ambient space.
std::vector<double> principal_angles(const Subspace& s1, const Subspace& s2);

/// Largest principal angle in degrees.
double max_angle_degrees(const Subspace& s1, const Subspace& s2);

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
double chi2_sf(double x, int df);

/// Flips column signs so each column's largest-magnitude entry is >= 0.
void apply_sign_convention(Matrix& columns);

/// Sum of log eigenvalues of an SPD matrix (log-determinant via Cholesky).
double log_det_spd(const Matrix& a);

/// (A + A^T) / 2
Matrix symmetrize(const Matrix& a);

/// True when two adjacent entries among the first `count` values are closer
/// than rel_gap times the largest magnitude.
bool has_collapsed_gap(const Vector& values_desc, int count, double rel_gap = 1e-9);

}  // namespace pfcred
