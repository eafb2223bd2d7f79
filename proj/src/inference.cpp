#include "pfcred/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace pfcred {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Matrix schur_complement(const Matrix& a11, const Matrix& a12, const Matrix& a22) {
  Eigen::LLT<Matrix> llt(a11);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularMatrix, "leading predictor block is singular");
  }
  return symmetrize(a22 - a12.transpose() * llt.solve(a12));
}

}  // namespace

std::string_view to_string(TestKind kind) {
  switch (kind) {
    case TestKind::LrtDim: return "lrt_dim";
    case TestKind::Predictor: return "predictor";
    case TestKind::Structure: return "structure";
  }
  return "unknown";
}

std::string_view to_string(DimMethod method) {
  switch (method) {
    case DimMethod::Lrt: return "lrt";
    case DimMethod::Aic: return "aic";
    case DimMethod::Bic: return "bic";
  }
  return "unknown";
}

TestReport make_report(TestKind kind, double loglik_full, double loglik_restricted, int df) {
  if (df < 1) throw Error(ErrorKind::InvalidInput, "test has no degrees of freedom");
  double stat = 2.0 * (loglik_full - loglik_restricted);
  // Both log-likelihoods carry O(n p) constants, so rounding scales with them.
  const double tol = 1e-8 * std::max(1.0, std::abs(loglik_full));
  if (stat < -tol) {
    throw Error(ErrorKind::Internal, "negative likelihood-ratio statistic " + std::to_string(stat));
  }
  stat = std::max(stat, 0.0);
  TestReport r;
  r.kind = kind;
  r.statistic = stat;
  r.df = df;
  r.p_value = chi2_sf(stat, df);
  return r;
}

int parameter_count(int p, int r, int d) { return p + d * (p - d) + d * r + p * (p + 1) / 2; }

DimSelection select_d_lrt(const DesignMatrices& design, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidInput, "alpha must be in (0, 1)");
  const int tau = design.tau();
  const double l_max = loglik_profile(design, tau);
  DimSelection sel;
  sel.method = DimMethod::Lrt;
  sel.alpha = alpha;
  sel.chosen_d = tau;
  bool decided = false;
  for (int w = 0; w <= tau; ++w) {
    DimRow row;
    row.w = w;
    row.loglik = loglik_profile(design, w);
    if (w < tau) {
      const TestReport t = make_report(TestKind::LrtDim, l_max, row.loglik,
                                       (design.r - w) * (design.p - w));
      row.statistic = t.statistic;
      row.df = t.df;
      row.p_value = t.p_value;
      row.rejected = t.p_value <= alpha;
    } else {
      row.p_value = 1.0;
    }
    if (!decided && !row.rejected) {
      sel.chosen_d = w;
      decided = true;
    }
    sel.per_w.push_back(row);
  }
  return sel;
}

DimSelection select_d_ic(const DesignMatrices& design, DimMethod criterion) {
  if (criterion == DimMethod::Lrt) throw Error(ErrorKind::InvalidInput, "use select_d_lrt for the LRT");
  const double h = criterion == DimMethod::Bic ? std::log(static_cast<double>(design.n)) : 2.0;
  DimSelection sel;
  sel.method = criterion;
  sel.alpha = std::numeric_limits<double>::quiet_NaN();
  double best = std::numeric_limits<double>::infinity();
  for (int w = 0; w <= design.tau(); ++w) {
    DimRow row;
    row.w = w;
    row.loglik = loglik_profile(design, w);
    row.df = parameter_count(design.p, design.r, w);
    row.statistic = -2.0 * row.loglik + h * row.df;
    row.p_value = std::numeric_limits<double>::quiet_NaN();
    if (row.statistic < best) {
      best = row.statistic;
      sel.chosen_d = w;
    }
    sel.per_w.push_back(row);
  }
  return sel;
}

PredictorTest test_predictors(const DesignMatrices& design, int d, const std::vector<int>& active) {
  const int p = design.p;
  const int p1 = static_cast<int>(active.size());
  const int p2 = p - p1;
  std::set<int> in_active;
  for (int i : active) {
    if (i < 0 || i >= p || !in_active.insert(i).second) {
      throw Error(ErrorKind::InvalidInput, "active indices must be distinct and in range");
    }
  }
  if (p1 == 0 || p2 == 0) {
    throw Error(ErrorKind::InvalidInput, "the active set must be a nonempty proper subset");
  }
  const int tau1 = std::min(design.r, p1);
  if (d < 1 || d > tau1) {
    throw Error(ErrorKind::InvalidInput,
                "d must satisfy 1 <= d <= min(r, p1) = " + std::to_string(tau1));
  }

  // Active coordinates first, tested ones trailing.
  std::vector<int> perm(active);
  std::vector<int> tested;
  for (int i = 0; i < p; ++i) {
    if (!in_active.count(i)) tested.push_back(i);
  }
  perm.insert(perm.end(), tested.begin(), tested.end());

  const Matrix s = design.Sigma(perm, perm);
  const Matrix sf = design.SigmaFit(perm, perm);
  const Matrix sr = design.SigmaRes(perm, perm);
  const Matrix s11 = s.topLeftCorner(p1, p1);
  const Matrix s12 = s.topRightCorner(p1, p2);
  const Matrix sr11 = sr.topLeftCorner(p1, p1);
  const Matrix sf11 = sf.topLeftCorner(p1, p1);

  const Matrix s22_1 = schur_complement(s11, s12, s.bottomRightCorner(p2, p2));
  const Matrix sr22_1 = schur_complement(sr11, sr.topRightCorner(p1, p2), sr.bottomRightCorner(p2, p2));

  const Matrix sr11_inv_half = sym_power(sr11, SymPower::NegHalf);
  const Matrix sr11_half = sym_power(sr11, SymPower::Half);
  SymEigen eig1 = eig_sym_desc(sr11_inv_half * sf11 * sr11_inv_half);
  for (Eigen::Index i = 0; i < eig1.values.size(); ++i) {
    if (i >= tau1 || eig1.values(i) < 0.0) eig1.values(i) = 0.0;
  }

  const double n = design.n;
  double tail1 = 0.0;
  for (int i = d; i < tau1; ++i) tail1 += std::log1p(eig1.values(i));
  const double l_full = loglik_from_spectrum(design, d);
  const double l_restricted = -0.5 * n * p * kLog2Pi - 0.5 * n * p - 0.5 * n * log_det_spd(sr11) -
                              0.5 * n * log_det_spd(s22_1) - 0.5 * n * tail1;

  PredictorTest out;
  out.report = make_report(TestKind::Predictor, l_full, l_restricted, d * p2);
  out.loglik_full = l_full;
  out.loglik_restricted = l_restricted;
  out.d = d;
  out.active = active;
  out.tested = tested;

  // Canonical-correlation form: squared correlations of X with f_y and of X1 with f_y.
  {
    const Vector rho2 = squared_canonical_correlations(design);
    const Matrix w11 = sym_power(s11, SymPower::NegHalf);
    const Vector t2 = eig_sym_desc(w11 * sf11 * w11).values.head(tau1).cwiseMax(0.0);
    double stat = n * log_det_spd(s22_1) - n * log_det_spd(sr22_1);
    for (int i = d; i < design.tau(); ++i) stat += n * std::log1p(-rho2(i));
    for (int i = d; i < tau1; ++i) stat -= n * std::log1p(-t2(i));
    out.statistic_canonical = stat;
  }

  // Restricted reduction and error covariance, mapped back to input order.
  Matrix basis = Matrix::Zero(p, d);
  const Matrix block = sr11_inv_half * eig1.vectors.leftCols(d);
  for (int k = 0; k < p1; ++k) basis.row(perm[k]) = block.row(k);
  out.restricted_subspace = Subspace::span_of(basis);

  Vector kdiag = eig1.values;
  kdiag.head(d).setZero();
  const Matrix delta11 = symmetrize(
      sr11_half * eig1.vectors * (Vector::Ones(p1) + kdiag).asDiagonal() * eig1.vectors.transpose() * sr11_half);
  Eigen::LLT<Matrix> s11_llt(s11);
  const Matrix s11_inv_s12 = s11_llt.solve(s12);
  Matrix delta_perm(p, p);
  delta_perm.topLeftCorner(p1, p1) = delta11;
  delta_perm.topRightCorner(p1, p2) = delta11 * s11_inv_s12;
  delta_perm.bottomLeftCorner(p2, p1) = delta_perm.topRightCorner(p1, p2).transpose();
  delta_perm.bottomRightCorner(p2, p2) = s22_1 + s11_inv_s12.transpose() * delta11 * s11_inv_s12;
  out.restricted_delta.resize(p, p);
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) out.restricted_delta(perm[a], perm[b]) = delta_perm(a, b);
  }
  return out;
}

PredictorTest test_predictors_maxw(const DesignMatrices& design, const std::vector<int>& active) {
  const int w = std::min(design.r, static_cast<int>(active.size()));
  return test_predictors(design, w, active);
}

EliminationResult backward_eliminate(const DesignMatrices& design, int d, double alpha) {
  EliminationResult result;
  result.kept.resize(static_cast<std::size_t>(design.p));
  std::iota(result.kept.begin(), result.kept.end(), 0);
  while (true) {
    const int m = static_cast<int>(result.kept.size());
    if (m - 1 < d || std::min(design.r, m - 1) < d) break;
    const DesignMatrices sub = restrict_predictors(design, result.kept);
    int worst = -1;
    double worst_p = -1.0;
    for (int j = 0; j < m; ++j) {
      std::vector<int> active;
      for (int k = 0; k < m; ++k) {
        if (k != j) active.push_back(k);
      }
      const double pv = test_predictors(sub, d, active).report.p_value;
      if (pv > worst_p) {
        worst_p = pv;
        worst = j;
      }
    }
    if (worst < 0 || worst_p <= alpha) break;
    result.steps.push_back({result.kept[static_cast<std::size_t>(worst)], worst_p});
    result.kept.erase(result.kept.begin() + worst);
  }
  return result;
}

}  // namespace pfcred
