#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include "oracles.hpp"
#include "pfcred/simlab.hpp"

using namespace pfcred;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no pfcred::Error thrown";
  return ErrorKind::Internal;
}

GeneratorParams params(GeneratorName name, int n, int p, std::uint64_t seed) {
  GeneratorParams g;
  g.name = name;
  g.n = n;
  g.p = p;
  g.seed = seed;
  return g;
}

}  // namespace

TEST(StreamSeed, DistinctAcrossStreamsAndIndices) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 3; ++s) {
    for (std::uint64_t i = 0; i < 200; ++i) seen.insert(stream_seed(7, s, i));
  }
  EXPECT_EQ(seen.size(), 600u);
  EXPECT_EQ(stream_seed(7, 1, 3), stream_seed(7, 1, 3));
  EXPECT_NE(stream_seed(7, 1, 3), stream_seed(8, 1, 3));
}

TEST(Generator, ReproducibleDraws) {
  const Generator g(params(GeneratorName::Fig1ExpNu, 50, 20, 3));
  const Sample a = g.draw(4);
  const Sample b = g.draw(4);
  const Sample c = g.draw(5);
  EXPECT_EQ(a.data.X, b.data.X);
  EXPECT_EQ(a.data.y.values(), b.data.y.values());
  EXPECT_NE(a.data.X, c.data.X);
  const Sample d = Generator(params(GeneratorName::Fig1ExpNu, 50, 20, 3)).draw(4);
  EXPECT_EQ(a.data.X, d.data.X);
}

TEST(Generator, TruthShapes) {
  const Generator fig1(params(GeneratorName::Fig1ExpNu, 30, 20, 1));
  EXPECT_EQ(fig1.truth().d, 1);
  const Generator sec5(params(GeneratorName::Sec5TwoDim, 30, 5, 1));
  EXPECT_EQ(sec5.truth().d, 2);
  EXPECT_EQ(sec5.truth().subspace.dim(), 2);
  const Matrix& d5 = sec5.truth().delta;
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(d5).eigenvalues().minCoeff(), 0.0);
  const Matrix want = d5.inverse() * sec5.truth().gamma;
  EXPECT_LT(oracle::max_angle(sec5.truth().subspace.basis(), want), 1e-12);

  const Generator sec8(params(GeneratorName::Sec8DiagDelta, 30, 6, 1));
  EXPECT_DOUBLE_EQ(sec8.truth().delta(5, 5), 1e5);
  EXPECT_DOUBLE_EQ(sec8.truth().delta(0, 1), 0.0);
}

TEST(Generator, PredictorDesignHasInactiveBlock) {
  GeneratorParams g = params(GeneratorName::Sec6NullTest, 40, 10, 2);
  g.p1 = 7;
  const Generator gen(g);
  const Matrix& b = gen.truth().subspace.basis();
  EXPECT_LT(b.bottomRows(3).norm(), 1e-10);
  EXPECT_NEAR(gen.truth().gamma.norm(), 1.0, 1e-12);
}

TEST(Generator, RejectsBadParameters) {
  EXPECT_EQ(kind_of([] { Generator(params(GeneratorName::Fig1ExpNu, 1, 20, 0)); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { Generator(params(GeneratorName::Sec5TwoDim, 50, 3, 0)); }), ErrorKind::InvalidInput);
  GeneratorParams g = params(GeneratorName::Sec6NullTest, 50, 5, 0);
  g.p1 = 5;
  EXPECT_EQ(kind_of([&] { Generator{g}; }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { parse_generator("sec9"); }), ErrorKind::InvalidInput);
  EXPECT_EQ(parse_generator("sec8_diagdelta"), GeneratorName::Sec8DiagDelta);
}

TEST(RandomBaseline, MatchesExpectedAngle) {
  const Generator g(params(GeneratorName::Fig1ExpNu, 30, 20, 1));
  const double mean = random_angle_baseline(g.truth().subspace, 20000, 11);
  EXPECT_NEAR(mean, oracle::expected_random_angle_deg(20), 0.2);
  EXPECT_NEAR(oracle::expected_random_angle_deg(20), 79.47, 0.01);
}

TEST(ParallelFor, CoversEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 4, [&](int i) { ++hits[static_cast<std::size_t>(i)]; });
  EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  parallel_for(0, 4, [](int) { FAIL(); });
}

TEST(AngleStudy, WorkerCountDoesNotChangeResults) {
  const GeneratorParams g = params(GeneratorName::Fig1ExpNu, 80, 20, 5);
  const std::vector<NamedBasis> bases{named_basis("poly:1"), named_basis("poly:3"), exp_basis()};
  const AngleStudy a = run_angle_study(g, bases, 12, 1);
  const AngleStudy b = run_angle_study(g, bases, 12, 4);
  ASSERT_EQ(a.records.size(), b.records.size());
  ASSERT_EQ(a.records.size(), 12u * 4u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].basis, b.records[i].basis);
    EXPECT_EQ(a.records[i].angle_deg, b.records[i].angle_deg);
  }
  const AngleStudy c = run_angle_study(params(GeneratorName::Fig1ExpNu, 80, 20, 6), bases, 12, 1);
  EXPECT_NE(a.records[0].angle_deg, c.records[0].angle_deg);
}

TEST(AngleStudy, SummaryRecomputableFromRecords) {
  const AngleStudy s = run_angle_study(params(GeneratorName::Fig1ExpNu, 80, 20, 8), {named_basis("poly:2")}, 9, 2);
  ASSERT_EQ(s.summary.size(), 2u);
  std::vector<double> v;
  for (const auto& r : s.records) {
    if (r.basis == "poly:2" && r.error.empty()) v.push_back(r.angle_deg);
  }
  std::sort(v.begin(), v.end());
  ASSERT_EQ(v.size(), 9u);
  EXPECT_EQ(s.summary[0].basis, "poly:2");
  EXPECT_DOUBLE_EQ(s.summary[0].median, v[4]);
  EXPECT_DOUBLE_EQ(s.summary[0].q1, v[2]);
  EXPECT_DOUBLE_EQ(s.summary[0].q3, v[6]);
  double mean = 0.0;
  for (double x : v) mean += x / 9.0;
  EXPECT_NEAR(s.summary[0].mean, mean, 1e-12);
  EXPECT_EQ(s.summary[1].basis, "random");
}

TEST(DimStudy, FractionsFromRecords) {
  GeneratorParams g = params(GeneratorName::Sec5TwoDim, 200, 5, 3);
  g.sigma_y = 2.0;
  const DimStudy s = run_dim_study(g, named_basis("abs:3"), GridAxis::N, {100, 200}, 10, 0.05, 2);
  ASSERT_EQ(s.records.size(), 2u * 10u * 3u);
  ASSERT_EQ(s.summary.size(), 6u);
  for (const DimSummary& row : s.summary) {
    int exact = 0, valid = 0;
    for (const DimRecord& r : s.records) {
      if (r.n != row.n || r.method != row.method || !r.error.empty()) continue;
      ++valid;
      exact += r.chosen_d == 2;
    }
    EXPECT_EQ(row.valid, valid);
    EXPECT_DOUBLE_EQ(row.f_exact, static_cast<double>(exact) / valid);
    EXPECT_LE(row.f_exact, row.f_plus1);
    EXPECT_LE(row.f_plus1, row.f_plus2);
  }
}

TEST(LevelStudy, RecordsMatchSummaryAndAreDeterministic) {
  GeneratorParams g = params(GeneratorName::Sec6NullTest, 0, 10, 4);
  g.p1 = 7;
  const LevelStudy a = run_level_study(LevelKind::Predictor, g, {60}, 20, {}, 1);
  const LevelStudy b = run_level_study(LevelKind::Predictor, g, {60}, 20, {}, 3);
  ASSERT_EQ(a.records.size(), 20u);
  int rejects = 0;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].statistic, b.records[i].statistic);
    EXPECT_EQ(a.records[i].df, 3);
    rejects += a.records[i].reject;
  }
  ASSERT_EQ(a.summary.size(), 1u);
  EXPECT_DOUBLE_EQ(a.summary[0].rejection, rejects / 20.0);
  EXPECT_DOUBLE_EQ(a.summary[0].non_rejection, 1.0 - rejects / 20.0);
}

TEST(LevelStudy, PredictorLevelsMatchExactNullDistribution) {
  GeneratorParams g = params(GeneratorName::Sec6NullTest, 0, 10, 9);
  g.p1 = 7;
  const std::vector<int> grid{20, 40, 120};
  const LevelStudy s = run_level_study(LevelKind::Predictor, g, grid, 2000, {}, 1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double exact = oracle::predictor_test_exact_level(grid[i], 7, 3, 0.05);
    const double se = std::sqrt(exact * (1.0 - exact) / 2000.0);
    EXPECT_NEAR(s.summary[i].rejection, exact, 4.0 * se) << "n = " << grid[i];
  }
  EXPECT_NEAR(oracle::predictor_test_exact_level(20, 7, 3, 0.05), 0.2961, 1e-4);
}

TEST(Generator, CustomDesign) {
  GeneratorParams g;
  g.name = GeneratorName::Custom;
  g.n = 500;
  g.seed = 2;
  g.custom_gamma = Matrix::Zero(4, 2);
  g.custom_gamma(0, 0) = 1.0;
  g.custom_gamma(1, 1) = 1.0;
  g.custom_delta = Vector(Eigen::Vector4d(1, 2, 3, 4)).asDiagonal();
  const Generator gen(g);
  EXPECT_EQ(gen.params().p, 4);
  EXPECT_EQ(gen.truth().d, 2);
  const Matrix want = g.custom_delta.inverse() * g.custom_gamma;
  EXPECT_LT(oracle::max_angle(gen.truth().subspace.basis(), want), 1e-14);
  const Sample s = gen.draw(0);
  // The second coordinate carries y^2, so its mean is close to sigma_y^2 = 1.
  EXPECT_NEAR(s.data.X.col(1).mean(), 1.0, 0.3);
  g.custom_delta(0, 0) = -1.0;
  EXPECT_EQ(kind_of([&] { Generator{g}; }), ErrorKind::InvalidInput);
  g.custom_delta = Matrix::Identity(3, 3);
  EXPECT_EQ(kind_of([&] { Generator{g}; }), ErrorKind::InvalidInput);
}
