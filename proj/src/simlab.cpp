#include "pfcred/simlab.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <tuple>
#include <utility>

namespace pfcred {

namespace {

constexpr std::uint64_t kDataStream = 0;
constexpr std::uint64_t kFixedStream = 1;
constexpr std::uint64_t kBaselineStream = 2;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Matrix gaussian_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix a(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) a(i, j) = z(rng);
  }
  return a;
}

Matrix standardized_columns(Matrix f) {
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    const double mean = f.col(j).mean();
    const double sd = std::sqrt((f.col(j).array() - mean).square().sum() / static_cast<double>(f.rows()));
    if (sd > 0.0) f.col(j) /= sd;
  }
  return f;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(master) ^ (stream * 0xd1b54a32d192ed03ULL)) + index);
}

std::string_view to_string(GeneratorName name) {
  switch (name) {
    case GeneratorName::Fig1ExpNu: return "fig1_exp_nu";
    case GeneratorName::Sec5TwoDim: return "sec5_twodim";
    case GeneratorName::Sec6NullTest: return "sec6_nulltest";
    case GeneratorName::Sec8DiagDelta: return "sec8_diagdelta";
    case GeneratorName::Custom: return "custom";
  }
  return "unknown";
}

GeneratorName parse_generator(std::string_view text) {
  for (auto g : {GeneratorName::Fig1ExpNu, GeneratorName::Sec5TwoDim, GeneratorName::Sec6NullTest,
                 GeneratorName::Sec8DiagDelta, GeneratorName::Custom}) {
    if (text == to_string(g)) return g;
  }
  throw Error(ErrorKind::InvalidInput, "unknown generator '" + std::string(text) + "'");
}

std::string_view to_string(LevelKind kind) {
  switch (kind) {
    case LevelKind::Predictor: return "predictor";
    case LevelKind::Structure: return "structure";
    case LevelKind::LrtDim: return "lrt_dim";
  }
  return "unknown";
}

Generator::Generator(GeneratorParams params) : params_(std::move(params)) {
  if (params_.name == GeneratorName::Custom) params_.p = static_cast<int>(params_.custom_gamma.rows());
  const int p = params_.p;
  if (params_.n < 2) throw Error(ErrorKind::InvalidInput, "generator needs n >= 2");
  if (!(params_.sigma_y > 0.0)) throw Error(ErrorKind::InvalidInput, "sigma_y must be positive");
  if (p < 1) throw Error(ErrorKind::InvalidInput, "generator needs p >= 1");

  auto random_delta = [&] {
    std::mt19937_64 rng(stream_seed(params_.seed, kFixedStream, static_cast<std::uint64_t>(p)));
    const Matrix a = gaussian_matrix(rng, p, p);
    return Matrix(a.transpose() * a);
  };

  switch (params_.name) {
    case GeneratorName::Fig1ExpNu:
      truth_.d = 1;
      truth_.gamma = Matrix::Constant(p, 1, 1.0 / std::sqrt(static_cast<double>(p)));
      truth_.delta = Matrix::Identity(p, p);
      break;
    case GeneratorName::Sec5TwoDim: {
      if (p < 5) throw Error(ErrorKind::InvalidInput, "sec5_twodim needs p >= 5");
      truth_.d = 2;
      truth_.gamma = Matrix::Zero(p, 2);
      truth_.gamma.col(0).head(4) << 1, 1, -1, -1;
      truth_.gamma.col(0) /= 2.0;
      truth_.gamma(0, 1) = truth_.gamma(2, 1) = truth_.gamma(4, 1) = 1.0 / std::sqrt(3.0);
      truth_.delta = random_delta();
      break;
    }
    case GeneratorName::Sec6NullTest: {
      const int p1 = params_.p1;
      if (p1 < 1 || p1 >= p) throw Error(ErrorKind::InvalidInput, "sec6_nulltest needs 1 <= p1 < p");
      truth_.d = 1;
      truth_.delta = random_delta();
      const Matrix inv = truth_.delta.llt().solve(Matrix::Identity(p, p));
      const int p2 = p - p1;
      const Vector g1 = Vector::Ones(p1);
      const Vector g2 = -inv.bottomRightCorner(p2, p2).llt().solve(inv.bottomLeftCorner(p2, p1) * g1);
      Vector g(p);
      g << g1, g2;
      truth_.gamma = g.normalized();
      break;
    }
    case GeneratorName::Sec8DiagDelta: {
      truth_.d = 1;
      truth_.gamma = Matrix::Constant(p, 1, 1.0 / std::sqrt(static_cast<double>(p)));
      truth_.delta = Matrix::Zero(p, p);
      for (int i = 0; i < p; ++i) truth_.delta(i, i) = std::pow(10.0, i);
      break;
    }
    case GeneratorName::Custom: {
      const Matrix& g = params_.custom_gamma;
      const Matrix& dl = params_.custom_delta;
      if (g.cols() < 1 || dl.rows() != p || dl.cols() != p || !g.allFinite() || !dl.allFinite()) {
        throw Error(ErrorKind::InvalidInput, "custom generator needs a p x d gamma and a p x p delta");
      }
      if ((dl - dl.transpose()).norm() > 1e-12 * dl.norm()) {
        throw Error(ErrorKind::InvalidInput, "custom delta is not symmetric");
      }
      if (Eigen::ColPivHouseholderQR<Matrix>(g).rank() < g.cols()) {
        throw Error(ErrorKind::InvalidInput, "custom gamma does not have full column rank");
      }
      truth_.d = static_cast<int>(g.cols());
      truth_.gamma = g;
      truth_.delta = dl;
      break;
    }
  }
  Eigen::LLT<Matrix> llt(truth_.delta);
  if (llt.info() != Eigen::Success) {
    throw Error(params_.name == GeneratorName::Custom ? ErrorKind::InvalidInput : ErrorKind::NumericalDegeneracy,
                "generator Delta is not positive definite");
  }
  delta_chol_ = llt.matrixL();
  truth_.subspace = Subspace::span_of(llt.solve(truth_.gamma));
}

Sample Generator::draw(std::uint64_t replication) const {
  const int n = params_.n;
  const int p = params_.p;
  std::mt19937_64 rng(stream_seed(params_.seed, kDataStream, replication));
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  Vector y(n);
  Matrix x(n, p);
  Vector e(p);
  for (int i = 0; i < n; ++i) {
    Vector mean;
    switch (params_.name) {
      case GeneratorName::Fig1ExpNu:
        y(i) = u(rng);
        mean = truth_.gamma.col(0) * std::exp(y(i));
        break;
      case GeneratorName::Sec5TwoDim:
        y(i) = params_.sigma_y * z(rng);
        mean = truth_.gamma.col(0) * y(i) + truth_.gamma.col(1) * std::abs(y(i));
        break;
      case GeneratorName::Sec6NullTest:
        y(i) = params_.sigma_y * z(rng);
        mean = truth_.gamma.col(0) * y(i);
        break;
      case GeneratorName::Sec8DiagDelta:
        y(i) = z(rng);
        mean = truth_.gamma.col(0) * y(i);
        break;
      case GeneratorName::Custom: {
        y(i) = params_.sigma_y * z(rng);
        mean = Vector::Zero(p);
        double power = 1.0;
        for (int k = 0; k < truth_.d; ++k) {
          power *= y(i);
          mean += truth_.gamma.col(k) * power;
        }
        break;
      }
    }
    for (int j = 0; j < p; ++j) e(j) = z(rng);
    x.row(i) = (mean + delta_chol_ * e).transpose();
  }
  return {make_dataset(std::move(x), Response::continuous(std::move(y))), truth_};
}

Sample generate(const GeneratorParams& params) { return Generator(params).draw(0); }

int worker_count() {
  if (const char* env = std::getenv("PFCRED_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  if (workers <= 0) workers = worker_count();
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

NamedBasis exp_basis() {
  return {"exp", [](const Dataset& data) {
            return BasisSpec::custom(standardized_columns(data.y.values().array().exp().matrix()));
          }};
}

NamedBasis named_basis(const std::string& spec) {
  if (spec == "exp") return exp_basis();
  if (spec.starts_with("abs:")) {
    // y, |y|, then y^3 .. y^K
    const int top = std::stoi(spec.substr(4));
    if (top < 2) throw Error(ErrorKind::InvalidInput, "abs basis needs a top degree >= 2");
    return {spec, [top](const Dataset& data) {
              const Vector& y = data.y.values();
              Matrix f(y.size(), top);
              f.col(0) = y;
              f.col(1) = y.cwiseAbs();
              for (int k = 3; k <= top; ++k) f.col(k - 1) = y.array().pow(k).matrix();
              return BasisSpec::custom(standardized_columns(std::move(f)));
            }};
  }
  const BasisSpec parsed = BasisSpec::parse(spec);
  return {spec, [parsed](const Dataset&) { return parsed; }};
}

double random_angle_baseline(const Subspace& truth, int draws, std::uint64_t seed) {
  if (draws < 1) throw Error(ErrorKind::InvalidInput, "need at least one draw");
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    std::mt19937_64 rng(stream_seed(seed, kBaselineStream, static_cast<std::uint64_t>(i)));
    const Subspace s = Subspace::span_of(gaussian_matrix(rng, truth.ambient(), truth.dim()));
    sum += max_angle_degrees(truth, s);
  }
  return sum / draws;
}

std::vector<AngleSummary> summarize(const std::vector<AngleRecord>& records,
                                    const std::vector<std::string>& order) {
  std::vector<AngleSummary> out;
  for (const auto& name : order) {
    AngleSummary s;
    s.basis = name;
    std::vector<double> angles;
    for (const auto& r : records) {
      if (r.basis != name) continue;
      if (r.error.empty()) {
        angles.push_back(r.angle_deg);
      } else {
        ++s.failed;
      }
    }
    s.valid = static_cast<int>(angles.size());
    if (!angles.empty()) {
      double total = 0.0;
      for (double a : angles) total += a;
      s.mean = total / s.valid;
    } else {
      s.mean = std::numeric_limits<double>::quiet_NaN();
    }
    s.median = quantile(angles, 0.5);
    s.q1 = quantile(angles, 0.25);
    s.q3 = quantile(angles, 0.75);
    out.push_back(s);
  }
  return out;
}

AngleStudy run_angle_study(const GeneratorParams& gen, const std::vector<NamedBasis>& bases, int reps,
                           int workers) {
  if (reps < 1) throw Error(ErrorKind::InvalidInput, "reps must be positive");
  const Generator generator(gen);
  const int d = generator.truth().d;
  const int per_rep = static_cast<int>(bases.size()) + 1;
  AngleStudy study;
  study.gen = gen;
  study.reps = reps;
  study.records.resize(static_cast<std::size_t>(reps * per_rep));
  parallel_for(reps, workers, [&](int rep) {
    const Sample s = generator.draw(static_cast<std::uint64_t>(rep));
    for (int k = 0; k < per_rep; ++k) {
      AngleRecord& rec = study.records[static_cast<std::size_t>(rep * per_rep + k)];
      rec.rep = rep;
      try {
        if (k < per_rep - 1) {
          const NamedBasis& b = bases[static_cast<std::size_t>(k)];
          rec.basis = b.name;
          const DesignMatrices design = build_design(s.data, b.make(s.data));
          rec.angle_deg = max_angle_degrees(sd_subspace(design.Sigma, design.SigmaFit, d), s.truth.subspace);
        } else {
          rec.basis = "random";
          std::mt19937_64 rng(stream_seed(gen.seed, kBaselineStream, static_cast<std::uint64_t>(rep)));
          const Subspace r = Subspace::span_of(gaussian_matrix(rng, gen.p, d));
          rec.angle_deg = max_angle_degrees(r, s.truth.subspace);
        }
      } catch (const std::exception& e) {
        rec.angle_deg = std::numeric_limits<double>::quiet_NaN();
        rec.error = e.what();
      }
    }
  });
  std::vector<std::string> order;
  for (const auto& b : bases) order.push_back(b.name);
  order.emplace_back("random");
  study.summary = summarize(study.records, order);
  return study;
}

std::vector<DimSummary> summarize(const std::vector<DimRecord>& records, int true_d) {
  std::vector<DimSummary> out;
  std::map<std::tuple<int, int, std::string>, std::size_t> index;
  std::vector<std::array<int, 4>> counts;
  for (const auto& r : records) {
    auto key = std::make_tuple(r.n, r.p, r.method);
    auto [it, inserted] = index.emplace(key, out.size());
    if (inserted) {
      DimSummary s;
      s.n = r.n;
      s.p = r.p;
      s.method = r.method;
      out.push_back(s);
      counts.push_back({0, 0, 0, 0});
    }
    DimSummary& s = out[it->second];
    auto& c = counts[it->second];
    if (!r.error.empty()) {
      ++s.failed;
      continue;
    }
    ++s.valid;
    if (r.chosen_d == true_d) ++c[0];
    if (r.chosen_d >= true_d && r.chosen_d <= true_d + 1) ++c[1];
    if (r.chosen_d >= true_d && r.chosen_d <= true_d + 2) ++c[2];
    if (r.chosen_d < true_d) ++c[3];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i].valid > 0 ? out[i].valid : std::numeric_limits<double>::quiet_NaN();
    out[i].f_exact = counts[i][0] / v;
    out[i].f_plus1 = counts[i][1] / v;
    out[i].f_plus2 = counts[i][2] / v;
    out[i].f_under = counts[i][3] / v;
  }
  return out;
}

DimStudy run_dim_study(const GeneratorParams& gen, const NamedBasis& basis, GridAxis axis,
                       const std::vector<int>& grid, int reps, double alpha, int workers) {
  if (reps < 1) throw Error(ErrorKind::InvalidInput, "reps must be positive");
  if (grid.empty()) throw Error(ErrorKind::InvalidInput, "empty grid");
  static const char* kMethods[] = {"lrt", "aic", "bic"};
  DimStudy study;
  study.gen = gen;
  study.basis = basis.name;
  study.axis = axis;
  study.grid = grid;
  study.reps = reps;
  study.alpha = alpha;
  study.records.resize(grid.size() * static_cast<std::size_t>(reps) * 3);

  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    GeneratorParams params = gen;
    (axis == GridAxis::N ? params.n : params.p) = grid[cell];
    const Generator generator(params);
    study.true_d = generator.truth().d;
    parallel_for(reps, workers, [&](int rep) {
      const std::size_t base = (cell * static_cast<std::size_t>(reps) + static_cast<std::size_t>(rep)) * 3;
      for (int m = 0; m < 3; ++m) {
        DimRecord& rec = study.records[base + static_cast<std::size_t>(m)];
        rec.n = params.n;
        rec.p = params.p;
        rec.rep = rep;
        rec.method = kMethods[m];
      }
      try {
        const Sample s = generator.draw(static_cast<std::uint64_t>(rep));
        const DesignMatrices design = build_design(s.data, basis.make(s.data));
        study.records[base].chosen_d = select_d_lrt(design, alpha).chosen_d;
        study.records[base + 1].chosen_d = select_d_ic(design, DimMethod::Aic).chosen_d;
        study.records[base + 2].chosen_d = select_d_ic(design, DimMethod::Bic).chosen_d;
      } catch (const std::exception& e) {
        for (int m = 0; m < 3; ++m) study.records[base + static_cast<std::size_t>(m)].error = e.what();
      }
    });
  }
  study.summary = summarize(study.records, study.true_d);
  return study;
}

std::vector<LevelSummary> summarize(const std::vector<LevelRecord>& records) {
  std::vector<LevelSummary> out;
  std::map<int, std::size_t> index;
  std::vector<int> rejects;
  for (const auto& r : records) {
    auto [it, inserted] = index.emplace(r.n, out.size());
    if (inserted) {
      LevelSummary s;
      s.n = r.n;
      out.push_back(s);
      rejects.push_back(0);
    }
    LevelSummary& s = out[it->second];
    if (!r.error.empty()) {
      ++s.failed;
      continue;
    }
    ++s.valid;
    if (r.reject) ++rejects[it->second];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    LevelSummary& s = out[i];
    if (s.valid == 0) {
      s.rejection = s.non_rejection = s.se = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    s.rejection = static_cast<double>(rejects[i]) / s.valid;
    s.non_rejection = 1.0 - s.rejection;
    s.se = std::sqrt(s.rejection * (1.0 - s.rejection) / s.valid);
  }
  return out;
}

LevelStudy run_level_study(LevelKind kind, const GeneratorParams& gen, const std::vector<int>& n_grid,
                           int reps, const LevelOptions& options, int workers) {
  if (reps < 1) throw Error(ErrorKind::InvalidInput, "reps must be positive");
  if (n_grid.empty()) throw Error(ErrorKind::InvalidInput, "empty grid");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw Error(ErrorKind::InvalidInput, "alpha must be in (0, 1)");
  const NamedBasis basis = named_basis(options.basis);
  LevelStudy study;
  study.kind = kind;
  study.gen = gen;
  study.options = options;
  study.grid = n_grid;
  study.reps = reps;
  study.records.resize(n_grid.size() * static_cast<std::size_t>(reps));

  for (std::size_t cell = 0; cell < n_grid.size(); ++cell) {
    GeneratorParams params = gen;
    params.n = n_grid[cell];
    const Generator generator(params);
    const DeltaStructure diag = DeltaStructure::diagonal(params.p);
    std::vector<int> active(static_cast<std::size_t>(params.p1));
    for (int i = 0; i < params.p1; ++i) active[static_cast<std::size_t>(i)] = i;

    parallel_for(reps, workers, [&](int rep) {
      LevelRecord& rec = study.records[cell * static_cast<std::size_t>(reps) + static_cast<std::size_t>(rep)];
      rec.n = params.n;
      rec.rep = rep;
      try {
        const Sample s = generator.draw(static_cast<std::uint64_t>(rep));
        const DesignMatrices design = build_design(s.data, basis.make(s.data));
        TestReport report;
        switch (kind) {
          case LevelKind::Predictor:
            report = test_predictors(design, options.d, active).report;
            break;
          case LevelKind::Structure:
            report = test_structure(design, diag, design.r).report;
            break;
          case LevelKind::LrtDim: {
            if (options.d < 0 || options.d >= design.tau()) {
              throw Error(ErrorKind::InvalidInput, "tested dimension must be below min(r, p)");
            }
            const DimRow row = select_d_lrt(design, options.alpha).per_w[static_cast<std::size_t>(options.d)];
            report.kind = TestKind::LrtDim;
            report.statistic = row.statistic;
            report.df = row.df;
            report.p_value = row.p_value;
            break;
          }
        }
        rec.statistic = report.statistic;
        rec.df = report.df;
        rec.p_value = report.p_value;
        rec.reject = report.p_value <= options.alpha;
        rec.reliable = report.reliable;
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
    });
  }
  study.summary = summarize(study.records);
  return study;
}

}  // namespace pfcred
