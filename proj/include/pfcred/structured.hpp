#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pfcred/inference.hpp"

namespace pfcred {

/// Error covariance constrained to Delta = sum_i delta_i G_i for known,
/// symmetric, linearly independent G_i. The inverse is assumed to share the
/// structure; fit_structured checks this numerically at the solution.
class DeltaStructure {
 public:
  enum class Kind { Diagonal, GroupedDiagonal, Equicorrelated, Custom };

  static DeltaStructure diagonal(int p);
  /// One free variance per distinct label; labels[i] is the group of coordinate i.
  static DeltaStructure grouped_diagonal(const std::vector<std::string>& labels);
  /// G_1 = I, G_2 = e e^T.
  static DeltaStructure equicorrelated(int p);
  static DeltaStructure custom(std::vector<Matrix> basis);
  /// All p(p+1)/2 symmetric unit matrices; spans every symmetric matrix.
  static DeltaStructure unrestricted(int p);

  /// "diag", "equicorr", "groups=a,b,..." or "custom=<path>".
  static DeltaStructure parse(std::string_view text, int p);

  Kind kind() const { return kind_; }
  int p() const { return p_; }
  int m() const { return static_cast<int>(basis_.size()); }
  const std::vector<Matrix>& basis() const { return basis_; }
  /// p^2 x m matrix whose columns are vec(G_i).
  const Matrix& stacked() const { return stacked_; }
  Matrix assemble(const Vector& coeffs) const;
  std::string describe() const;

 private:
  DeltaStructure(Kind kind, std::vector<Matrix> basis, std::string label);

  Kind kind_ = Kind::Custom;
  int p_ = 0;
  std::vector<Matrix> basis_;
  Matrix stacked_;
  std::string label_;
};

/// Reads m blocks of p rows of p whitespace-separated numbers.
std::vector<Matrix> load_structure_matrices(const std::string& path, int p);

struct StructuredOptions {
  double tol = 1e-9;
  int max_iter = 500;
};

struct StructuredFit {
  int d = 0;
  Vector delta_coeffs;
  Matrix delta_tilde;
  double loglik = 0.0;
  Subspace subspace;
  int iterations = 0;
  bool converged = false;
  /// Largest absolute component of the score with respect to the coefficients.
  double gradient_norm = 0.0;
  std::vector<std::string> warnings;
};

/// Maximum-likelihood fit of the model with structured error covariance,
/// by the damped fixed-point iteration on the coefficients.
StructuredFit fit_structured(const DesignMatrices& design, int d, const DeltaStructure& structure,
                             const StructuredOptions& opts = {});

/// Score components tr(Delta G_h) - tr(SigmaRes G_h) - sum_{i>d} lambda_i
/// tr(Delta^{1/2} u_i u_i^T Delta^{1/2} G_h) at the given coefficients.
Vector structured_score(const DesignMatrices& design, int d, const DeltaStructure& structure,
                        const Vector& coeffs);

struct StructureTest {
  TestReport report;
  int w = 0;
  double loglik_unstructured = 0.0;
  StructuredFit fit;
};

/// Likelihood-ratio test of the structure against an unrestricted Delta at
/// working dimension w (w < 0 selects min(r, p)).
StructureTest test_structure(const DesignMatrices& design, const DeltaStructure& structure, int w = -1,
                             const StructuredOptions& opts = {});

}  // namespace pfcred
