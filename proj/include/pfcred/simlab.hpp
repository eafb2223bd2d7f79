#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pfcred/inference.hpp"
#include "pfcred/structured.hpp"

namespace pfcred {

/// Seed of replication `index` in stream `stream` under `master`. Streams are
/// independent of worker count and execution order.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

enum class GeneratorName { Fig1ExpNu, Sec5TwoDim, Sec6NullTest, Sec8DiagDelta, Custom };
std::string_view to_string(GeneratorName name);
GeneratorName parse_generator(std::string_view text);

struct GeneratorParams {
  GeneratorName name = GeneratorName::Fig1ExpNu;
  int n = 200;
  int p = 20;
  double sigma_y = 1.0;
  std::uint64_t seed = 0;
  /// Size of the active block for the predictor-test design.
  int p1 = 7;
  /// Custom design: X_y = gamma (y, y^2, ..., y^d)^T + N(0, delta) with
  /// Y ~ N(0, sigma_y^2) and d = gamma.cols(); p is taken from gamma.
  Matrix custom_gamma;
  Matrix custom_delta;
};

struct Truth {
  Subspace subspace;  // span(Delta^{-1} Gamma)
  int d = 1;
  Matrix gamma;
  Matrix delta;
};

struct Sample {
  Dataset data;
  Truth truth;
};

/// Simulation design with its fixed parameters (Gamma, Delta) drawn once at
/// construction; draw() produces replication-specific data.
class Generator {
 public:
  explicit Generator(GeneratorParams params);
  const GeneratorParams& params() const { return params_; }
  const Truth& truth() const { return truth_; }
  Sample draw(std::uint64_t replication) const;

 private:
  GeneratorParams params_;
  Truth truth_;
  Matrix delta_chol_;  // lower factor of Delta
};

/// Convenience: Generator(params).draw(0).
Sample generate(const GeneratorParams& params);

/// Number of worker threads: PFCRED_THREADS if set and positive, otherwise the
/// hardware concurrency.
int worker_count();

/// Calls body(i) for i in [0, count) on up to `workers` threads.
void parallel_for(int count, int workers, const std::function<void(int)>& body);

struct NamedBasis {
  std::string name;
  std::function<BasisSpec(const Dataset&)> make;
};

NamedBasis named_basis(const std::string& spec);
/// Custom basis exp(y), the inverse mean of the fig1 design.
NamedBasis exp_basis();

struct AngleRecord {
  int rep = 0;
  std::string basis;
  double angle_deg = 0.0;
  std::string error;
};

struct AngleSummary {
  std::string basis;
  int valid = 0;
  int failed = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct AngleStudy {
  GeneratorParams gen;
  int reps = 0;
  std::vector<AngleRecord> records;
  std::vector<AngleSummary> summary;
};

/// Largest principal angle between S_d(Sigma, SigmaFit) and the true subspace
/// for each basis and replication, plus a "random" baseline of uniformly
/// distributed subspaces of the same dimension.
AngleStudy run_angle_study(const GeneratorParams& gen, const std::vector<NamedBasis>& bases, int reps,
                           int workers = 0);
std::vector<AngleSummary> summarize(const std::vector<AngleRecord>& records,
                                    const std::vector<std::string>& order);

enum class GridAxis { N, P };

struct DimRecord {
  int n = 0;
  int p = 0;
  int rep = 0;
  std::string method;
  int chosen_d = -1;
  std::string error;
};

struct DimSummary {
  int n = 0;
  int p = 0;
  std::string method;
  int valid = 0;
  int failed = 0;
  double f_exact = 0.0;     // F(d)
  double f_plus1 = 0.0;     // F(d, d+1)
  double f_plus2 = 0.0;     // F(d, d+1, d+2)
  double f_under = 0.0;     // fraction below d
};

struct DimStudy {
  GeneratorParams gen;
  std::string basis;
  GridAxis axis = GridAxis::N;
  std::vector<int> grid;
  int reps = 0;
  int true_d = 0;
  double alpha = 0.05;
  std::vector<DimRecord> records;
  std::vector<DimSummary> summary;
};

/// F-fractions of the dimension estimates by the sequential LRT, AIC and BIC
/// over a grid of n or p. The design's Delta is drawn once per grid value.
DimStudy run_dim_study(const GeneratorParams& gen, const NamedBasis& basis, GridAxis axis,
                       const std::vector<int>& grid, int reps, double alpha = 0.05, int workers = 0);
std::vector<DimSummary> summarize(const std::vector<DimRecord>& records, int true_d);

enum class LevelKind { Predictor, Structure, LrtDim };
std::string_view to_string(LevelKind kind);

struct LevelOptions {
  double alpha = 0.05;
  /// Fitting basis; for the structure study poly:r with w = r.
  std::string basis = "poly:1";
  /// Dimension used in the predictor test; the tested w for lrt_dim.
  int d = 1;
};

struct LevelRecord {
  int n = 0;
  int rep = 0;
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool reject = false;
  bool reliable = true;
  std::string error;
};

struct LevelSummary {
  int n = 0;
  int valid = 0;
  int failed = 0;
  double rejection = 0.0;
  double non_rejection = 0.0;
  double se = 0.0;
};

struct LevelStudy {
  LevelKind kind = LevelKind::Predictor;
  GeneratorParams gen;
  LevelOptions options;
  std::vector<int> grid;
  int reps = 0;
  std::vector<LevelRecord> records;
  std::vector<LevelSummary> summary;
};

/// Empirical rejection rate at level alpha of the predictor test (the
/// trailing p - p1 predictors), the diagonal-structure test, or the
/// dimension LRT at w = options.d, for each n in the grid.
LevelStudy run_level_study(LevelKind kind, const GeneratorParams& gen, const std::vector<int>& n_grid,
                           int reps, const LevelOptions& options = {}, int workers = 0);
std::vector<LevelSummary> summarize(const std::vector<LevelRecord>& records);

/// Mean largest angle between a fixed subspace and uniformly random
/// subspaces of the same dimension.
double random_angle_baseline(const Subspace& truth, int draws, std::uint64_t seed);

}  // namespace pfcred
