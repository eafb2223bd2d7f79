#include "pfcred/pfc.hpp"

#include <cmath>
#include <numbers>

namespace pfcred {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_dimension(const DesignMatrices& design, int d) {
  if (d < 1 || d > design.tau()) {
    throw Error(ErrorKind::InvalidInput,
                "d = " + std::to_string(d) + " outside 1..min(r, p) = " + std::to_string(design.tau()) +
                    (d == 0 ? "; test d = 0 with dimension selection (pfcred select-d)" : ""));
  }
}

// -(np/2) - (np/2) log(2 pi) - (n/2) log|SigmaRes|
double loglik_base(const DesignMatrices& design) {
  const double np = static_cast<double>(design.n) * design.p;
  return -0.5 * np - 0.5 * np * kLog2Pi - 0.5 * design.n * log_det_spd(design.SigmaRes);
}

// beta relative to an orthonormal gamma: (G^T D^-1 G)^-1 G^T D^-1 Bhat
Matrix coefficients(const Matrix& gamma, const Matrix& delta, const Matrix& bhat) {
  Eigen::LLT<Matrix> llt(delta);
  const Matrix dinv_gamma = llt.solve(gamma);
  const Matrix gram = gamma.transpose() * dinv_gamma;
  return gram.ldlt().solve(dinv_gamma.transpose() * bhat);
}

void note_spectrum(PfcFit& fit, const Vector& values, int count) {
  if (values.size() == 0 || values(0) <= 0.0) {
    fit.warnings.emplace_back("DegenerateSpectrum: no fitted signal (leading eigenvalue is zero)");
  } else if (has_collapsed_gap(values, count)) {
    fit.warnings.emplace_back(
        "DegenerateSpectrum: adjacent eigenvalues coincide; directions follow the ordered "
        "eigenvector convention");
  }
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Pc: return "pc";
    case ModelKind::IsotonicPfc: return "isotonic_pfc";
    case ModelKind::PfcFull: return "pfc_full";
  }
  return "unknown";
}

Vector whitened_fit_spectrum(const DesignMatrices& design) {
  const Matrix& w = design.sigma_res_inv_half;
  Vector lambda = eig_sym_desc(w * design.SigmaFit * w).values;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (i >= design.tau() || lambda(i) < 0.0) lambda(i) = 0.0;
  }
  return lambda;
}

Vector squared_canonical_correlations(const DesignMatrices& design) {
  const Matrix w = sym_power(design.Sigma, SymPower::NegHalf);
  Vector rho2 = eig_sym_desc(w * design.SigmaFit * w).values.head(design.tau());
  return rho2.cwiseMax(0.0);
}

double loglik_from_spectrum(const DesignMatrices& design, int d) {
  if (d < 0 || d > design.tau()) throw Error(ErrorKind::InvalidInput, "d outside 0..min(r, p)");
  const Vector lambda = whitened_fit_spectrum(design);
  double tail = 0.0;
  for (int i = d; i < design.tau(); ++i) tail += std::log1p(lambda(i));
  return loglik_base(design) - 0.5 * design.n * tail;
}

double loglik_profile(const DesignMatrices& design, int d) {
  if (d < 0 || d > design.tau()) throw Error(ErrorKind::InvalidInput, "d outside 0..min(r, p)");
  const Vector rho2 = squared_canonical_correlations(design);
  double tail = 0.0;
  for (int i = 0; i < design.tau(); ++i) {
    if (rho2(i) >= 1.0 - 1e-12) {
      throw Error(ErrorKind::NumericalDegeneracy,
                  "a squared canonical correlation is 1; the basis predicts X perfectly");
    }
    if (i >= d) tail += std::log1p(-rho2(i));
  }
  return loglik_base(design) + 0.5 * design.n * tail;
}

double loglik_at_delta(const DesignMatrices& design, int d, const Matrix& delta) {
  if (d < 0 || d > design.p) throw Error(ErrorKind::InvalidInput, "d outside 0..p");
  Eigen::LLT<Matrix> llt(symmetrize(delta));
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPSD, "Delta is not positive definite");
  const Matrix l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  // L^{-1} A L^{-T} for the trace and the eigenvalues of Delta^{-1} A.
  auto whiten = [&](const Matrix& a) {
    const Matrix left = llt.matrixL().solve(a);
    return symmetrize(llt.matrixL().solve(left.transpose()));
  };
  const double trace_res = whiten(design.SigmaRes).trace();
  const Vector fit_eigs = eig_sym_desc(whiten(design.SigmaFit)).values;
  const double tail = fit_eigs.tail(design.p - d).sum();
  const double n = design.n;
  return -0.5 * n * design.p * kLog2Pi - 0.5 * n * logdet - 0.5 * n * trace_res - 0.5 * n * tail;
}

PfcFit fit_pfc(const DesignMatrices& design, int d) {
  check_dimension(design, d);
  const Matrix& res_half = design.sigma_res_half;
  const Matrix& res_inv_half = design.sigma_res_inv_half;

  SymEigen eig = eig_sym_desc(res_inv_half * design.SigmaFit * res_inv_half);
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (i >= design.tau() || eig.values(i) < 0.0) eig.values(i) = 0.0;
  }

  PfcFit fit;
  fit.model_kind = ModelKind::PfcFull;
  fit.d = d;
  fit.mu_hat = design.x_mean;
  fit.lambda_hat = eig.values;
  note_spectrum(fit, eig.values, design.tau());

  Vector k = eig.values;
  k.head(d).setZero();
  fit.delta_hat = symmetrize(design.SigmaRes +
                             res_half * eig.vectors * k.asDiagonal() * eig.vectors.transpose() * res_half);

  fit.projection = res_inv_half * eig.vectors.leftCols(d);
  apply_sign_convention(fit.projection);
  fit.reduction = Subspace::span_of(fit.projection);
  fit.gamma_span = Subspace::span_of(res_half * eig.vectors.leftCols(d));
  fit.beta_hat = coefficients(fit.gamma_span.basis(), fit.delta_hat, design.Bhat);

  double tail = 0.0;
  for (int i = d; i < design.tau(); ++i) tail += std::log1p(eig.values(i));
  fit.loglik = loglik_base(design) - 0.5 * design.n * tail;
  return fit;
}

PfcFit fit_pc(const DesignMatrices& design, int d) {
  check_dimension(design, d);
  if (d >= design.p) throw Error(ErrorKind::InvalidInput, "the PC model needs d < p");
  const SymEigen eig = eig_sym_desc(design.Sigma);
  const int p = design.p;

  PfcFit fit;
  fit.model_kind = ModelKind::Pc;
  fit.d = d;
  fit.mu_hat = design.x_mean;
  fit.lambda_hat = eig.values;
  note_spectrum(fit, eig.values, p);

  const double sigma2 = eig.values.tail(p - d).mean();
  if (!(sigma2 > 0.0)) throw Error(ErrorKind::NumericalDegeneracy, "trailing eigenvalues of Sigma vanish");
  fit.delta_hat = sigma2 * Matrix::Identity(p, p);
  fit.projection = eig.vectors.leftCols(d);
  fit.reduction = Subspace::span_of(fit.projection);
  fit.gamma_span = fit.reduction;
  fit.beta_hat = fit.gamma_span.basis().transpose() * design.Bhat;
  const double n = design.n;
  fit.loglik = -0.5 * n * p * kLog2Pi - 0.5 * n * p * std::log(sigma2) -
               0.5 * n * eig.values.tail(p - d).sum() / sigma2;
  return fit;
}

PfcFit fit_isotonic_pfc(const DesignMatrices& design, int d) {
  check_dimension(design, d);
  const SymEigen eig = eig_sym_desc(design.SigmaFit);
  const int p = design.p;
  if (eig.values(0) <= 1e-12 * design.Sigma.trace()) {
    throw Error(ErrorKind::NumericalDegeneracy, "fitted covariance is zero; the basis carries no signal");
  }

  PfcFit fit;
  fit.model_kind = ModelKind::IsotonicPfc;
  fit.d = d;
  fit.mu_hat = design.x_mean;
  fit.lambda_hat = eig.values.cwiseMax(0.0);
  note_spectrum(fit, fit.lambda_hat, design.tau());

  const double sigma2 = (design.Sigma.trace() - fit.lambda_hat.head(d).sum()) / p;
  if (!(sigma2 > 0.0)) throw Error(ErrorKind::NumericalDegeneracy, "isotropic error variance vanishes");
  fit.delta_hat = sigma2 * Matrix::Identity(p, p);
  fit.projection = eig.vectors.leftCols(d);
  fit.reduction = Subspace::span_of(fit.projection);
  fit.gamma_span = fit.reduction;
  fit.beta_hat = fit.gamma_span.basis().transpose() * design.Bhat;
  const double n = design.n;
  fit.loglik = -0.5 * n * p * kLog2Pi - 0.5 * n * p * std::log(sigma2) - 0.5 * n * p;
  return fit;
}

Matrix reduce(const PfcFit& fit, const Matrix& x_new) {
  if (x_new.cols() != fit.projection.rows()) {
    throw Error(ErrorKind::InvalidInput, "new observations have " + std::to_string(x_new.cols()) +
                                             " columns, the fit has p = " +
                                             std::to_string(fit.projection.rows()));
  }
  return x_new * fit.projection;
}

EquivalentSubspaces equivalent_subspaces(const DesignMatrices& design, int d) {
  const PfcFit fit = fit_pfc(design, d);
  EquivalentSubspaces s;
  s.delta_sigma = sd_subspace(fit.delta_hat, design.Sigma, d);
  s.res_sigma = sd_subspace(design.SigmaRes, design.Sigma, d);
  s.delta_fit = sd_subspace(fit.delta_hat, design.SigmaFit, d);
  s.res_fit = sd_subspace(design.SigmaRes, design.SigmaFit, d);
  s.sigma_fit = sd_subspace(design.Sigma, design.SigmaFit, d);
  return s;
}

}  // namespace pfcred
