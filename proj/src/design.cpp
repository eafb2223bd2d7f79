#include "pfcred/design.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

namespace pfcred {

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::InvalidInput, "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

void require_continuous(const Response& y, const char* kind) {
  if (y.is_categorical()) {
    throw Error(ErrorKind::InvalidInput, std::string(kind) + " basis needs a numeric response");
  }
}

// Tolerance-based full-column-rank check on a (possibly centered) basis.
bool full_column_rank(const Matrix& f) {
  Eigen::ColPivHouseholderQR<Matrix> qr(f);
  qr.setThreshold(1e-10);
  return qr.rank() == f.cols();
}

Matrix residual_half_power(const Matrix& sigma_res, const Matrix& sigma, SymPower e) {
  const SymEigen res = eig_sym_desc(sigma_res);
  const double scale = std::max(eig_sym_desc(sigma).values(0), 0.0);
  if (scale == 0.0 || res.values(res.values.size() - 1) <= 1e-10 * scale) {
    throw Error(ErrorKind::ResidualCovSingular,
                "residual covariance is not positive definite; reduce the number of basis "
                "columns r, drop collinear predictors, or fit a structured error covariance");
  }
  return sym_power(sigma_res, e);
}

}  // namespace

Response Response::continuous(Vector values) {
  Response r;
  r.values_ = std::move(values);
  return r;
}

Response Response::categorical(std::vector<std::string> labels) {
  Response r;
  r.categorical_ = true;
  r.labels_ = std::move(labels);
  return r;
}

Eigen::Index Response::size() const {
  return categorical_ ? static_cast<Eigen::Index>(labels_.size()) : values_.size();
}

std::vector<std::string> Response::sorted_levels() const {
  if (categorical_) {
    std::set<std::string> levels(labels_.begin(), labels_.end());
    return {levels.begin(), levels.end()};
  }
  std::set<double> levels(values_.data(), values_.data() + values_.size());
  std::vector<std::string> out;
  for (double v : levels) out.push_back(format_number(v));
  return out;
}

std::string Response::label_at(Eigen::Index i) const {
  return categorical_ ? labels_[static_cast<std::size_t>(i)] : format_number(values_(i));
}

Dataset make_dataset(Matrix X, Response y) {
  if (X.rows() < 2) throw Error(ErrorKind::InvalidInput, "need at least 2 observations");
  if (X.cols() < 1) throw Error(ErrorKind::InvalidInput, "need at least 1 predictor");
  if (y.size() != X.rows()) {
    throw Error(ErrorKind::InvalidInput, "response length does not match the number of rows");
  }
  if (!X.allFinite()) throw Error(ErrorKind::InvalidInput, "predictors contain non-finite values");
  if (!y.is_categorical() && !y.values().allFinite()) {
    throw Error(ErrorKind::InvalidInput, "response contains non-finite values");
  }
  if (y.is_categorical() && y.sorted_levels().size() < 2) {
    throw Error(ErrorKind::DegenerateResponse, "categorical response needs at least 2 labels");
  }
  Dataset d;
  d.X = std::move(X);
  d.y = std::move(y);
  for (Eigen::Index j = 0; j < d.X.cols(); ++j) d.predictor_names.push_back("x" + std::to_string(j + 1));
  return d;
}

BasisSpec BasisSpec::polynomial(int degree) {
  if (degree < 1) throw Error(ErrorKind::InvalidInput, "polynomial degree must be >= 1");
  BasisSpec s;
  s.kind_ = Kind::Polynomial;
  s.degree_ = degree;
  return s;
}

BasisSpec BasisSpec::slices(int count) {
  if (count < 2) throw Error(ErrorKind::InvalidInput, "need at least 2 slices");
  BasisSpec s;
  s.kind_ = Kind::Slices;
  s.slices_ = count;
  return s;
}

BasisSpec BasisSpec::categorical() {
  BasisSpec s;
  s.kind_ = Kind::Categorical;
  return s;
}

BasisSpec BasisSpec::piecewise_polynomial(int count, int degree) {
  if (count < 2) throw Error(ErrorKind::InvalidInput, "need at least 2 slices");
  if (degree < 0) throw Error(ErrorKind::InvalidInput, "piecewise degree must be >= 0");
  BasisSpec s;
  s.kind_ = Kind::PiecewisePolynomial;
  s.slices_ = count;
  s.degree_ = degree;
  return s;
}

BasisSpec BasisSpec::custom(Matrix f) {
  if (f.cols() < 1) throw Error(ErrorKind::InvalidInput, "custom basis needs at least one column");
  BasisSpec s;
  s.kind_ = Kind::Custom;
  s.custom_ = std::move(f);
  return s;
}

BasisSpec BasisSpec::parse(std::string_view text) {
  if (text == "categorical") return categorical();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorKind::InvalidInput, "unknown basis '" + std::string(text) + "'");
  }
  const auto head = text.substr(0, colon);
  const auto rest = text.substr(colon + 1);
  if (head == "poly") return polynomial(parse_int(rest, "polynomial degree"));
  if (head == "slices") return slices(parse_int(rest, "slice count"));
  if (head == "pw") {
    const auto c2 = rest.find(':');
    if (c2 == std::string_view::npos) {
      throw Error(ErrorKind::InvalidInput, "piecewise basis needs pw:H:K");
    }
    return piecewise_polynomial(parse_int(rest.substr(0, c2), "slice count"),
                                parse_int(rest.substr(c2 + 1), "piecewise degree"));
  }
  throw Error(ErrorKind::InvalidInput, "unknown basis '" + std::string(text) + "'");
}

int BasisSpec::columns_for(const Response& y) const {
  switch (kind_) {
    case Kind::Polynomial: return degree_;
    case Kind::Slices: return slices_ - 1;
    case Kind::Categorical: return static_cast<int>(y.sorted_levels().size()) - 1;
    case Kind::PiecewisePolynomial: return slices_ * (degree_ + 1) - 1;
    case Kind::Custom: return static_cast<int>(custom_.cols());
  }
  return 0;
}

bool BasisSpec::standardizes() const {
  return kind_ == Kind::Polynomial || kind_ == Kind::PiecewisePolynomial;
}

std::string BasisSpec::describe() const {
  switch (kind_) {
    case Kind::Polynomial: return "poly:" + std::to_string(degree_);
    case Kind::Slices: return "slices:" + std::to_string(slices_);
    case Kind::Categorical: return "categorical";
    case Kind::PiecewisePolynomial:
      return "pw:" + std::to_string(slices_) + ":" + std::to_string(degree_);
    case Kind::Custom: return "custom:" + std::to_string(custom_.cols());
  }
  return "unknown";
}

std::vector<int> slice_response(const Vector& y, int count) {
  const auto n = static_cast<int>(y.size());
  if (count < 2) throw Error(ErrorKind::InvalidInput, "need at least 2 slices");
  {
    std::set<double> distinct(y.data(), y.data() + y.size());
    if (static_cast<int>(distinct.size()) < count) {
      throw Error(ErrorKind::DegenerateResponse,
                  "response has " + std::to_string(distinct.size()) + " distinct values, fewer than " +
                      std::to_string(count) + " slices");
    }
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return y(a) < y(b); });

  std::vector<int> slice(static_cast<std::size_t>(n), 0);
  const int base = n / count;
  const int extra = n % count;
  int pos = 0;
  int nominal_end = 0;
  for (int k = 0; k < count; ++k) {
    nominal_end += base + (k < extra ? 1 : 0);
    int end = k + 1 == count ? n : std::max(nominal_end, pos + 1);
    while (end < n && end > 0 && y(order[end]) == y(order[end - 1])) ++end;
    if (pos >= end || pos >= n) {
      throw Error(ErrorKind::DegenerateResponse, "tied responses leave slice " + std::to_string(k + 1) + " empty");
    }
    for (; pos < end; ++pos) slice[static_cast<std::size_t>(order[pos])] = k;
  }
  return slice;
}

Matrix build_basis(const Response& y, const BasisSpec& spec) {
  const Eigen::Index n = y.size();
  const int r = spec.columns_for(y);
  if (r < 1) throw Error(ErrorKind::DegenerateResponse, "basis has no columns");
  if (n <= r) throw Error(ErrorKind::InvalidInput, "need more observations than basis columns");

  Matrix f = Matrix::Zero(n, r);
  switch (spec.kind()) {
    case BasisSpec::Kind::Polynomial: {
      require_continuous(y, "polynomial");
      for (int j = 0; j < r; ++j) f.col(j) = y.values().array().pow(j + 1);
      break;
    }
    case BasisSpec::Kind::Slices: {
      require_continuous(y, "sliced");
      const auto slice = slice_response(y.values(), spec.slice_count());
      for (Eigen::Index i = 0; i < n; ++i) {
        const int k = slice[static_cast<std::size_t>(i)];
        if (k < r) f(i, k) = 1.0;
      }
      break;
    }
    case BasisSpec::Kind::Categorical: {
      const auto levels = y.sorted_levels();
      std::map<std::string, int> index;
      for (std::size_t k = 0; k < levels.size(); ++k) index[levels[k]] = static_cast<int>(k);
      for (Eigen::Index i = 0; i < n; ++i) {
        const int k = index.at(y.label_at(i));
        if (k < r) f(i, k) = 1.0;
      }
      break;
    }
    case BasisSpec::Kind::PiecewisePolynomial: {
      require_continuous(y, "piecewise polynomial");
      const int h = spec.slice_count();
      const int deg = spec.degree();
      const auto slice = slice_response(y.values(), h);
      for (Eigen::Index i = 0; i < n; ++i) {
        const int k = slice[static_cast<std::size_t>(i)];
        for (int j = 0; j <= deg; ++j) {
          if (k == h - 1 && j == 0) continue;
          // Columns are laid out slice by slice; the last slice has no intercept.
          const int col = k * (deg + 1) + j - (k == h - 1 ? 1 : 0);
          f(i, col) = std::pow(y.values()(i), j);
        }
      }
      break;
    }
    case BasisSpec::Kind::Custom: {
      f = spec.custom_matrix();
      if (f.rows() != n) {
        throw Error(ErrorKind::InvalidInput, "custom basis has " + std::to_string(f.rows()) +
                                                 " rows for " + std::to_string(n) + " observations");
      }
      if (!f.allFinite()) throw Error(ErrorKind::InvalidInput, "custom basis has non-finite entries");
      if (!full_column_rank(f)) {
        throw Error(ErrorKind::RankDeficientBasis, "custom basis columns are linearly dependent");
      }
      break;
    }
  }
  return f;
}

DesignMatrices build_design(const Matrix& X, const Matrix& f_raw, bool standardize_basis) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Eigen::Index r = f_raw.cols();
  if (n < 2 || p < 1 || r < 1) throw Error(ErrorKind::InvalidInput, "empty design");
  if (f_raw.rows() != n) throw Error(ErrorKind::InvalidInput, "basis and predictors differ in row count");
  if (!X.allFinite() || !f_raw.allFinite()) {
    throw Error(ErrorKind::InvalidInput, "design inputs contain non-finite values");
  }

  DesignMatrices d;
  d.n = static_cast<int>(n);
  d.p = static_cast<int>(p);
  d.r = static_cast<int>(r);
  d.x_mean = X.colwise().mean().transpose();
  d.Xc = X.rowwise() - d.x_mean.transpose();
  d.Fc = f_raw.rowwise() - f_raw.colwise().mean();
  if (standardize_basis) {
    for (Eigen::Index j = 0; j < r; ++j) {
      const double sd = std::sqrt(d.Fc.col(j).squaredNorm() / static_cast<double>(n));
      if (sd == 0.0) throw Error(ErrorKind::RankDeficientBasis, "basis column is constant");
      d.Fc.col(j) /= sd;
    }
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(d.Fc);
  qr.setThreshold(1e-10);
  if (qr.rank() < r) {
    throw Error(ErrorKind::RankDeficientBasis, "centered basis F^T F is singular");
  }
  if (n <= p + r) {
    throw Error(ErrorKind::ResidualCovSingular,
                "need n > p + r for a nonsingular residual covariance; reduce r or use a "
                "structured error covariance");
  }

  // Projection onto span(Fc) through an orthonormal basis of that span, which
  // is the normal-equation solve without squaring the condition number.
  const Matrix q = qr.householderQ() * Matrix::Identity(n, r);
  const Matrix z = q.transpose() * d.Xc;
  const Matrix resid = d.Xc - q * z;
  const double inv_n = 1.0 / static_cast<double>(n);
  d.Sigma = symmetrize(d.Xc.transpose() * d.Xc) * inv_n;
  d.SigmaFit = symmetrize(z.transpose() * z) * inv_n;
  d.SigmaRes = symmetrize(resid.transpose() * resid) * inv_n;
  d.Bhat = qr.solve(d.Xc).transpose();

  d.sigma_res_half = residual_half_power(d.SigmaRes, d.Sigma, SymPower::Half);
  d.sigma_res_inv_half = sym_power(d.SigmaRes, SymPower::NegHalf);
  return d;
}

DesignMatrices build_design(const Dataset& data, const BasisSpec& spec) {
  return build_design(data.X, build_basis(data.y, spec), spec.standardizes());
}

DesignMatrices restrict_predictors(const DesignMatrices& design, const std::vector<int>& indices) {
  if (indices.empty()) throw Error(ErrorKind::InvalidInput, "empty predictor subset");
  std::set<int> seen;
  for (int i : indices) {
    if (i < 0 || i >= design.p || !seen.insert(i).second) {
      throw Error(ErrorKind::InvalidInput, "predictor indices must be distinct and in range");
    }
  }
  DesignMatrices d;
  d.n = design.n;
  d.p = static_cast<int>(indices.size());
  d.r = design.r;
  d.Xc = design.Xc(Eigen::all, indices);
  d.Fc = design.Fc;
  d.x_mean = design.x_mean(indices);
  d.Sigma = design.Sigma(indices, indices);
  d.SigmaFit = design.SigmaFit(indices, indices);
  d.SigmaRes = design.SigmaRes(indices, indices);
  d.Bhat = design.Bhat(indices, Eigen::all);
  d.sigma_res_half = residual_half_power(d.SigmaRes, d.Sigma, SymPower::Half);
  d.sigma_res_inv_half = sym_power(d.SigmaRes, SymPower::NegHalf);
  return d;
}

}  // namespace pfcred
