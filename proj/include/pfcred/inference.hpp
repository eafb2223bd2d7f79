#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pfcred/pfc.hpp"

namespace pfcred {

enum class TestKind { LrtDim, Predictor, Structure };
std::string_view to_string(TestKind kind);

/// A likelihood-ratio statistic with its asymptotic chi-square p-value.
/// `reliable` is false when the restricted fit behind the statistic did not
/// converge.
struct TestReport {
  TestKind kind = TestKind::LrtDim;
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool reliable = true;
};

/// Builds a report from 2 * (loglik_full - loglik_restricted). Rounding-level
/// negative statistics are clamped to zero; a clearly negative one means the
/// two fits are not nested and raises an Internal error.
TestReport make_report(TestKind kind, double loglik_full, double loglik_restricted, int df);

enum class DimMethod { Lrt, Aic, Bic };
std::string_view to_string(DimMethod method);

struct DimRow {
  int w = 0;
  double loglik = 0.0;
  /// Lambda_w for the LRT, IC(w) for the information criteria.
  double statistic = 0.0;
  /// Chi-square df for the LRT, parameter count g(w) for the criteria.
  int df = 0;
  /// NaN for the information criteria.
  double p_value = 0.0;
  bool rejected = false;
};

struct DimSelection {
  DimMethod method = DimMethod::Lrt;
  double alpha = 0.05;
  int chosen_d = 0;
  std::vector<DimRow> per_w;
};

/// Number of real parameters of the model with dimension d:
/// p + d(p - d) + d r + p(p + 1) / 2.
int parameter_count(int p, int r, int d);

/// Sequential tests of d = w against d > w for w = 0, 1, ...; the estimate is
/// the first w not rejected at level alpha.
DimSelection select_d_lrt(const DesignMatrices& design, double alpha = 0.05);

/// Minimizes -2 L_w + h(n) g(w) over w = 0..min(r, p); ties go to the
/// smaller w. h(n) = log n for BIC and 2 for AIC.
DimSelection select_d_ic(const DesignMatrices& design, DimMethod criterion);

struct PredictorTest {
  TestReport report;
  /// The same statistic from the canonical-correlation expression.
  double statistic_canonical = 0.0;
  double loglik_full = 0.0;
  double loglik_restricted = 0.0;
  int d = 0;
  std::vector<int> active;
  std::vector<int> tested;
  /// Reduction estimated under the hypothesis; rows of tested predictors are 0.
  Subspace restricted_subspace;
  Matrix restricted_delta;
};

/// Likelihood-ratio test that the predictors outside `active` carry no
/// information about the response once the active ones are known.
PredictorTest test_predictors(const DesignMatrices& design, int d, const std::vector<int>& active);

/// As test_predictors with the working dimension min(r, p1).
PredictorTest test_predictors_maxw(const DesignMatrices& design, const std::vector<int>& active);

struct EliminationStep {
  int removed = 0;
  double p_value = 0.0;
};

struct EliminationResult {
  std::vector<int> kept;
  std::vector<EliminationStep> steps;
};

/// Repeatedly drops the predictor whose single-predictor test has the largest
/// p-value while that p-value exceeds alpha.
EliminationResult backward_eliminate(const DesignMatrices& design, int d, double alpha = 0.05);

}  // namespace pfcred
