#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pfcred/design.hpp"

namespace pfcred {

enum class ModelKind { Pc, IsotonicPfc, PfcFull };

std::string_view to_string(ModelKind kind);

/// Maximum-likelihood fit of the inverse-regression model for a fixed d.
///
/// `reduction` is an orthonormal basis of the estimated sufficient-reduction
/// subspace. `projection` spans the same subspace but is scaled so that
/// X * projection gives the reduction coordinates, which are invariant
/// (up to column sign) under full-rank linear transforms of X for the
/// unstructured model. `beta_hat` is expressed relative to the orthonormal
/// basis in `gamma_span`.
///
/// For the unstructured model `lambda_hat` holds the eigenvalues of
/// SigmaRes^{-1/2} SigmaFit SigmaRes^{-1/2}; the isotropic models store the
/// spectrum they took eigenvectors from (Sigma or SigmaFit).
struct PfcFit {
  ModelKind model_kind = ModelKind::PfcFull;
  int d = 0;
  Vector mu_hat;
  Matrix delta_hat;
  Subspace gamma_span;
  Matrix beta_hat;
  Vector lambda_hat;
  double loglik = 0.0;
  Subspace reduction;
  Matrix projection;
  std::vector<std::string> warnings;
};

PfcFit fit_pfc(const DesignMatrices& design, int d);
PfcFit fit_pc(const DesignMatrices& design, int d);
PfcFit fit_isotonic_pfc(const DesignMatrices& design, int d);

/// Reduction coordinates of new observations (rows of x_new); not centered.
Matrix reduce(const PfcFit& fit, const Matrix& x_new);

/// Eigenvalues of SigmaRes^{-1/2} SigmaFit SigmaRes^{-1/2}, descending, with
/// the structurally zero tail (index >= min(p, r)) set to 0.
Vector whitened_fit_spectrum(const DesignMatrices& design);

/// Squared sample canonical correlations between X and f_y, descending,
/// length min(p, r); computed from Sigma^{-1} SigmaFit.
Vector squared_canonical_correlations(const DesignMatrices& design);

/// Maximized log-likelihood L_d from the whitened spectrum (1 <= d or d = 0).
double loglik_from_spectrum(const DesignMatrices& design, int d);

/// Maximized log-likelihood L_d from the squared canonical correlations,
/// defined for 0 <= d <= min(p, r).
double loglik_profile(const DesignMatrices& design, int d);

/// Log-likelihood maximized over everything except the error covariance,
/// evaluated at a given SPD `delta`.
double loglik_at_delta(const DesignMatrices& design, int d, const Matrix& delta);

struct EquivalentSubspaces {
  Subspace delta_sigma;   // S_d(Delta, Sigma)
  Subspace res_sigma;     // S_d(SigmaRes, Sigma)
  Subspace delta_fit;     // S_d(Delta, SigmaFit)
  Subspace res_fit;       // S_d(SigmaRes, SigmaFit)
  Subspace sigma_fit;     // S_d(Sigma, SigmaFit)

  std::vector<Subspace> all() const {
    return {delta_sigma, res_sigma, delta_fit, res_fit, sigma_fit};
  }
};

EquivalentSubspaces equivalent_subspaces(const DesignMatrices& design, int d);

}  // namespace pfcred
