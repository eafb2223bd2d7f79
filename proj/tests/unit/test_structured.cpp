#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pfcred/structured.hpp"

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

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("pfcred_structured_" + name);
  std::ofstream(path) << text;
  return path.string();
}

// Data whose error covariance is diagonal with spread-out variances.
fixtures::Instance diagonal_instance(std::uint64_t seed, int n, int p, int r) {
  std::mt19937_64 rng(seed);
  fixtures::Instance in;
  in.y = oracle::gaussian(rng, n, 1).col(0);
  in.f.resize(n, r);
  for (int k = 0; k < r; ++k) in.f.col(k) = in.y.array().pow(k + 1).matrix();
  Vector sd(p);
  for (int i = 0; i < p; ++i) sd(i) = 0.5 + i;
  const Matrix coef = oracle::gaussian(rng, r, p);
  in.x = in.f * coef + oracle::gaussian(rng, n, p) * sd.asDiagonal();
  in.design = build_design(in.x, in.f);
  return in;
}

}  // namespace

TEST(DeltaStructure, FactoriesAndParse) {
  EXPECT_EQ(DeltaStructure::diagonal(4).m(), 4);
  EXPECT_EQ(DeltaStructure::equicorrelated(4).m(), 2);
  EXPECT_EQ(DeltaStructure::unrestricted(4).m(), 10);
  const DeltaStructure g = DeltaStructure::grouped_diagonal({"b", "a", "b", "c"});
  EXPECT_EQ(g.m(), 3);
  EXPECT_DOUBLE_EQ(g.basis()[0](2, 2), 1.0);
  EXPECT_EQ(DeltaStructure::parse("diag", 3).kind(), DeltaStructure::Kind::Diagonal);
  EXPECT_EQ(DeltaStructure::parse("equicorr", 3).kind(), DeltaStructure::Kind::Equicorrelated);
  EXPECT_EQ(DeltaStructure::parse("groups=x,y,x", 3).m(), 2);
  EXPECT_EQ(kind_of([] { DeltaStructure::parse("groups=x,y", 3); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { DeltaStructure::parse("banded", 3); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { DeltaStructure::equicorrelated(1); }), ErrorKind::InvalidInput);
  const Vector c = Vector::LinSpaced(3, 1, 3);
  EXPECT_LT((DeltaStructure::diagonal(3).assemble(c) - Matrix(c.asDiagonal())).norm(), 1e-15);
}

TEST(DeltaStructure, RejectsBadMatrices) {
  Matrix asym = Matrix::Zero(2, 2);
  asym(0, 1) = 1.0;
  EXPECT_EQ(kind_of([&] { DeltaStructure::custom({asym}); }), ErrorKind::InvalidInput);
  const Matrix i2 = Matrix::Identity(2, 2);
  EXPECT_EQ(kind_of([&] { DeltaStructure::custom({i2, 2.0 * i2}); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([&] { DeltaStructure::custom({i2, Matrix::Identity(3, 3)}); }), ErrorKind::InvalidInput);
}

TEST(DeltaStructure, LoadsMatricesFromFile) {
  const auto ok = write_temp("ok.txt", "1 0\n0 1\n\n0 1\n1 0\n");
  const auto mats = load_structure_matrices(ok, 2);
  ASSERT_EQ(mats.size(), 2u);
  EXPECT_DOUBLE_EQ(mats[1](0, 1), 1.0);
  EXPECT_EQ(DeltaStructure::parse("custom=" + ok, 2).m(), 2);
  const auto ragged = write_temp("ragged.txt", "1 0 0\n");
  EXPECT_EQ(kind_of([&] { load_structure_matrices(ragged, 2); }), ErrorKind::ParseError);
  const auto word = write_temp("word.txt", "1 0 zero 1\n");
  EXPECT_EQ(kind_of([&] { load_structure_matrices(word, 2); }), ErrorKind::ParseError);
}

TEST(FitStructured, FullSpanReproducesUnstructuredFit) {
  for (std::uint64_t seed = 70; seed < 74; ++seed) {
    const auto in = fixtures::random_instance(seed, 80, 4, 3);
    const DeltaStructure full = DeltaStructure::unrestricted(4);
    for (int d = 1; d <= 2; ++d) {
      const StructuredFit s = fit_structured(in.design, d, full);
      const PfcFit u = fit_pfc(in.design, d);
      EXPECT_TRUE(s.converged);
      EXPECT_NEAR(s.loglik, u.loglik, 1e-6);
      EXPECT_LT((s.delta_tilde - u.delta_hat).norm(), 1e-5 * u.delta_hat.norm());
      EXPECT_LT(principal_angles(s.subspace, u.reduction).back(), 1e-5);
    }
  }
}

TEST(FitStructured, FullDimensionIsOneShot) {
  const auto in = diagonal_instance(75, 60, 4, 2);
  const DeltaStructure diag = DeltaStructure::diagonal(4);
  const StructuredFit s = fit_structured(in.design, 2, diag);
  EXPECT_EQ(s.iterations, 0);
  EXPECT_TRUE(s.converged);
  EXPECT_LT(s.gradient_norm, 1e-10 * in.design.Sigma.norm());
  const Vector want = in.design.SigmaRes.diagonal();
  EXPECT_LT((s.delta_coeffs - want).norm(), 1e-12 * want.norm());
}

TEST(FitStructured, StationaryAtConvergence) {
  const auto in = diagonal_instance(76, 200, 5, 3);
  for (const DeltaStructure& st : {DeltaStructure::diagonal(5), DeltaStructure::equicorrelated(5)}) {
    const StructuredFit s = fit_structured(in.design, 1, st);
    ASSERT_TRUE(s.converged) << st.describe();
    const Vector score = structured_score(in.design, 1, st, s.delta_coeffs);
    EXPECT_LT(score.cwiseAbs().maxCoeff(), 1e-6 * in.design.Sigma.norm()) << st.describe();
    EXPECT_NEAR(s.loglik, loglik_at_delta(in.design, 1, s.delta_tilde), 1e-9 * std::abs(s.loglik));
    // Perturbing the coefficients cannot raise the likelihood.
    for (int k = 0; k < st.m(); ++k) {
      Vector c = s.delta_coeffs;
      c(k) *= 1.01;
      EXPECT_LE(loglik_at_delta(in.design, 1, st.assemble(c)), s.loglik + 1e-9 * std::abs(s.loglik));
    }
  }
}

TEST(FitStructured, LikelihoodsAreOrderedByModelSize) {
  const auto in = diagonal_instance(77, 150, 4, 2);
  const double iso = fit_isotonic_pfc(in.design, 1).loglik;
  const double diag = fit_structured(in.design, 1, DeltaStructure::diagonal(4)).loglik;
  const double full = fit_pfc(in.design, 1).loglik;
  EXPECT_LE(iso, diag + 1e-9 * std::abs(diag));
  EXPECT_LE(diag, full + 1e-9 * std::abs(full));
}

TEST(FitStructured, DiagonalEquivariance) {
  const auto in = diagonal_instance(78, 120, 4, 2);
  const Vector s = Vector::LinSpaced(4, 0.5, 3.0);
  const DesignMatrices moved = build_design(in.x * s.asDiagonal(), in.f);
  const DeltaStructure diag = DeltaStructure::diagonal(4);
  const StructuredFit f0 = fit_structured(in.design, 1, diag);
  const StructuredFit f1 = fit_structured(moved, 1, diag);
  const Matrix expect = s.asDiagonal() * f0.delta_tilde * s.asDiagonal();
  EXPECT_LT((f1.delta_tilde - expect).norm(), 1e-6 * expect.norm());
  const Matrix back = s.asDiagonal().inverse() * f0.subspace.basis();
  EXPECT_LT(oracle::max_angle(f1.subspace.basis(), back), 1e-6);
}

TEST(FitStructured, WarnsWhenInverseLeavesStructure) {
  const auto in = fixtures::random_instance(79, 100, 3, 2);
  Matrix e12 = Matrix::Zero(3, 3);
  e12(0, 1) = e12(1, 0) = 1.0;
  const DeltaStructure open = DeltaStructure::custom({Matrix::Identity(3, 3), e12});
  const StructuredFit s = fit_structured(in.design, 1, open);
  bool found = false;
  for (const auto& w : s.warnings) found = found || w.rfind("ClosureViolation", 0) == 0;
  EXPECT_TRUE(found);
  const StructuredFit closed = fit_structured(in.design, 1, DeltaStructure::diagonal(3));
  for (const auto& w : closed.warnings) EXPECT_NE(w.rfind("ClosureViolation", 0), 0u);
}

TEST(FitStructured, ValidatesInput) {
  const auto in = fixtures::random_instance(80, 40, 3, 2);
  EXPECT_EQ(kind_of([&] { fit_structured(in.design, 1, DeltaStructure::diagonal(4)); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([&] { fit_structured(in.design, 0, DeltaStructure::diagonal(3)); }), ErrorKind::InvalidInput);
}

TEST(TestStructure, DegreesOfFreedomAndNesting) {
  const auto in = diagonal_instance(81, 150, 4, 2);
  const StructureTest t = test_structure(in.design, DeltaStructure::diagonal(4));
  EXPECT_EQ(t.w, 2);
  EXPECT_EQ(t.report.df, 6);
  EXPECT_GE(t.report.statistic, 0.0);
  EXPECT_NEAR(t.report.p_value, oracle::chi2_sf(t.report.statistic, 6), 1e-12);
  EXPECT_EQ(test_structure(in.design, DeltaStructure::equicorrelated(4), 1).report.df, 8);
  EXPECT_EQ(kind_of([&] { test_structure(in.design, DeltaStructure::unrestricted(4)); }),
            ErrorKind::InvalidInput);
}

TEST(TestStructure, DetectsWrongStructure) {
  const auto in = fixtures::random_instance(82, 600, 4, 1);
  const StructureTest t = test_structure(in.design, DeltaStructure::equicorrelated(4), 1);
  EXPECT_LT(t.report.p_value, 1e-6);
}
