#include "pfcred/matrixkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace pfcred {

namespace {

void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) {
    throw Error(ErrorKind::InvalidInput, std::string(what) + " has non-finite entries");
  }
}

void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorKind::InvalidInput, std::string(what) + " must be a nonempty square matrix");
  }
}

}  // namespace

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

void apply_sign_convention(Matrix& columns) {
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    auto col = columns.col(j);
    const double largest = col.cwiseAbs().maxCoeff();
    if (largest == 0.0) continue;
    // Near-equal magnitudes count as ties so the choice is stable under
    // last-bit noise; the lowest index wins.
    Eigen::Index pick = 0;
    while (std::abs(col(pick)) < largest * (1.0 - 1e-12)) ++pick;
    if (col(pick) < 0.0) col = -col;
  }
}

SymEigen eig_sym_desc(const Matrix& a) {
  require_square(a, "eig_sym_desc input");
  require_finite(a, "eig_sym_desc input");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(a));
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalDegeneracy, "symmetric eigensolver did not converge");
  }
  SymEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  apply_sign_convention(out.vectors);
  return out;
}

Matrix sym_power(const Matrix& a, SymPower exponent, double rel_tol) {
  SymEigen eig = eig_sym_desc(a);
  const double top = eig.values(0);
  const double tol = rel_tol * std::max(top, 0.0);
  Vector powered(eig.values.size());
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    double v = eig.values(i);
    if (v < -tol || (top <= 0.0 && v < 0.0)) {
      throw Error(ErrorKind::NotPSD, "matrix has eigenvalue " + std::to_string(v) +
                                         " below the PSD tolerance");
    }
    if (v < 0.0) v = 0.0;
    if (exponent != SymPower::Half && (v <= tol || v == 0.0)) {
      throw Error(ErrorKind::SingularMatrix,
                  "matrix is singular at tolerance (eigenvalue " + std::to_string(v) + ")");
    }
    switch (exponent) {
      case SymPower::Half: powered(i) = std::sqrt(v); break;
      case SymPower::NegHalf: powered(i) = 1.0 / std::sqrt(v); break;
      case SymPower::Inverse: powered(i) = 1.0 / v; break;
    }
  }
  return symmetrize(eig.vectors * powered.asDiagonal() * eig.vectors.transpose());
}

Subspace Subspace::span_of(const Matrix& spanning) {
  if (spanning.cols() < 1 || spanning.cols() > spanning.rows()) {
    throw Error(ErrorKind::InvalidInput, "subspace dimension must satisfy 1 <= d <= p");
  }
  require_finite(spanning, "spanning set");
  Eigen::HouseholderQR<Matrix> qr(spanning);
  const auto r_diag = qr.matrixQR().diagonal().cwiseAbs();
  const double scale = std::max(r_diag.maxCoeff(), spanning.cwiseAbs().maxCoeff());
  if (scale == 0.0 || r_diag.minCoeff() <= 1e-12 * scale) {
    throw Error(ErrorKind::InvalidInput, "spanning set is not of full column rank");
  }
  Subspace s;
  s.basis_ = qr.householderQ() * Matrix::Identity(spanning.rows(), spanning.cols());
  apply_sign_convention(s.basis_);
  return s;
}

Subspace sd_subspace(const Matrix& a, const Matrix& b, int d) {
  require_square(a, "A");
  if (b.rows() != a.rows() || b.cols() != a.cols()) {
    throw Error(ErrorKind::InvalidInput, "A and B must have the same shape");
  }
  if (d < 1 || d > a.rows()) {
    throw Error(ErrorKind::InvalidInput, "d must satisfy 1 <= d <= p");
  }
  const Matrix a_inv_half = sym_power(a, SymPower::NegHalf);
  const SymEigen eig = eig_sym_desc(a_inv_half * b * a_inv_half);
  return Subspace::span_of(a_inv_half * eig.vectors.leftCols(d));
}

std::vector<double> principal_angles(const Subspace& s1, const Subspace& s2) {
  if (s1.dim() != s2.dim() || s1.ambient() != s2.ambient() || s1.dim() == 0) {
    throw Error(ErrorKind::InvalidInput, "principal angles need subspaces of equal dimension");
  }
  const Matrix cross = s1.basis().transpose() * s2.basis();
  const Vector cosines = Eigen::JacobiSVD<Matrix>(cross).singularValues();  // descending
  // Sines from the part of s2 outside s1; accurate where acos is not.
  const Matrix outside = s2.basis() - s1.basis() * cross;
  Vector sines = Eigen::JacobiSVD<Matrix>(outside).singularValues();
  std::sort(sines.data(), sines.data() + sines.size());  // ascending, pairs with descending cosines
  std::vector<double> angles(static_cast<std::size_t>(cosines.size()));
  for (Eigen::Index i = 0; i < cosines.size(); ++i) {
    const double c = std::clamp(cosines(i), 0.0, 1.0);
    angles[static_cast<std::size_t>(i)] =
        c > std::sqrt(0.5) ? std::asin(std::clamp(sines(i), 0.0, 1.0)) : std::acos(c);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

double max_angle_degrees(const Subspace& s1, const Subspace& s2) {
  return principal_angles(s1, s2).back() * 180.0 / std::numbers::pi;
}

double log_det_spd(const Matrix& a) {
  Eigen::LLT<Matrix> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularMatrix, "matrix is not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

bool has_collapsed_gap(const Vector& values_desc, int count, double rel_gap) {
  const int k = std::min<int>(count, static_cast<int>(values_desc.size()));
  if (k < 2) return false;
  const double radius = values_desc.cwiseAbs().maxCoeff();
  if (radius == 0.0) return true;
  for (int i = 0; i + 1 < k; ++i) {
    if (values_desc(i) - values_desc(i + 1) < rel_gap * radius) return true;
  }
  return false;
}

namespace {

// Regularized lower incomplete gamma P(a, z) by its power series; used for z < a.
double gamma_p_series(double a, double z) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 100000; ++n) {
    term *= z / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-z + a * std::log(z) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, z) by modified Lentz continued
// fraction; used for z >= a.
double gamma_q_fraction(double a, double z) {
  constexpr double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
  double b = z + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-z + a * std::log(z) - std::lgamma(a)) * h;
}

}  // namespace

double chi2_sf(double x, int df) {
  if (df < 1) throw Error(ErrorKind::InvalidInput, "chi-square df must be >= 1");
  if (!(x >= 0.0)) throw Error(ErrorKind::InvalidInput, "chi-square argument must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double a = 0.5 * df;
  const double z = 0.5 * x;
  const double q = x < df ? 1.0 - gamma_p_series(a, z) : gamma_q_fraction(a, z);
  return std::clamp(q, 0.0, 1.0);
}

}  // namespace pfcred
