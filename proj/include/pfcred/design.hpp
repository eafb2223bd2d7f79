#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pfcred/matrixkit.hpp"

namespace pfcred {

/// Response vector: either continuous reals or categorical labels.
class Response {
 public:
  Response() = default;
  static Response continuous(Vector values);
  static Response categorical(std::vector<std::string> labels);

  bool is_categorical() const { return categorical_; }
  Eigen::Index size() const;
  const Vector& values() const { return values_; }
  const std::vector<std::string>& labels() const { return labels_; }

  /// Distinct labels in sorted order. Continuous responses are sorted
  /// numerically and formatted, so numeric codes can be used as categories.
  std::vector<std::string> sorted_levels() const;
  /// Label of observation i (numeric responses are formatted).
  std::string label_at(Eigen::Index i) const;

 private:
  bool categorical_ = false;
  Vector values_;
  std::vector<std::string> labels_;
};

/// n observations on (X, Y); rows of X are observations.
struct Dataset {
  Matrix X;
  Response y;
  std::vector<std::string> predictor_names;
  std::string response_name = "y";

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

/// Validates shapes, finiteness and label counts.
Dataset make_dataset(Matrix X, Response y);

/// Headered comma-separated file. Empty `predictor_columns` selects every
/// column other than the response.
Dataset load_csv(const std::string& path, const std::string& response_column,
                 const std::vector<std::string>& predictor_columns = {},
                 bool categorical_response = false);

/// Named numeric columns of a headered CSV file, e.g. new observations to reduce.
Matrix load_predictors_csv(const std::string& path, const std::vector<std::string>& columns);

class BasisSpec {
 public:
  enum class Kind { Polynomial, Slices, Categorical, PiecewisePolynomial, Custom };

  static BasisSpec polynomial(int degree);
  static BasisSpec slices(int count);
  static BasisSpec categorical();
  /// One polynomial of `degree` per slice; the intercept of the last slice is
  /// dropped, so r = count * (degree + 1) - 1.
  static BasisSpec piecewise_polynomial(int count, int degree);
  static BasisSpec custom(Matrix f);
  /// "poly:K", "slices:H", "categorical" or "pw:H:K".
  static BasisSpec parse(std::string_view text);

  Kind kind() const { return kind_; }
  int degree() const { return degree_; }
  int slice_count() const { return slices_; }
  const Matrix& custom_matrix() const { return custom_; }

  /// Number of basis columns r this spec produces for the given response.
  int columns_for(const Response& y) const;
  /// Polynomial-type columns are rescaled to unit SD before centering.
  bool standardizes() const;
  std::string describe() const;

 private:
  Kind kind_ = Kind::Polynomial;
  int degree_ = 1;
  int slices_ = 0;
  Matrix custom_;
};

/// Slice membership (0-based bin index per observation) using equal-count
/// bins over the stably sorted response; earlier bins take the remainder and
/// a run of tied values is never split across a boundary.
std::vector<int> slice_response(const Vector& y, int count);

/// Raw (uncentered) n x r basis matrix f_y.
Matrix build_basis(const Response& y, const BasisSpec& spec);

/// Centered design objects and moment matrices with divisor n. Immutable once
/// built; the residual covariance powers are cached for the fitters.
struct DesignMatrices {
  Matrix Xc;        // n x p centered predictors
  Matrix Fc;        // n x r centered (and possibly rescaled) basis
  Vector x_mean;    // length p
  Matrix Sigma;     // Xc^T Xc / n
  Matrix SigmaFit;  // Xc^T P_F Xc / n
  Matrix SigmaRes;  // Sigma - SigmaFit
  Matrix Bhat;      // p x r, Xc^T Fc (Fc^T Fc)^{-1}
  Matrix sigma_res_half;
  Matrix sigma_res_inv_half;
  int n = 0;
  int p = 0;
  int r = 0;

  int tau() const { return p < r ? p : r; }
};

DesignMatrices build_design(const Dataset& data, const BasisSpec& spec);

/// Design from a predictor matrix and an explicit raw basis.
DesignMatrices build_design(const Matrix& X, const Matrix& f_raw, bool standardize_basis = false);

/// Design for a subset of predictors, taken from the blocks of `design`.
DesignMatrices restrict_predictors(const DesignMatrices& design, const std::vector<int>& indices);

}  // namespace pfcred
