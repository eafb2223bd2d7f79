#pragma once

#include <cstdint>
#include <random>

#include "oracles.hpp"
#include "pfcred/pfc.hpp"

namespace fixtures {

using pfcred::Matrix;
using pfcred::Vector;

struct Instance {
  Matrix x;
  Matrix f;
  Vector y;
  pfcred::DesignMatrices design;
};

/// Random regression with a rank-min(r, p) inverse mean and correlated errors.
/// The basis is a polynomial in a normal response, scaled column by column.
inline Instance random_instance(std::uint64_t seed, int n, int p, int r) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Instance in;
  in.y.resize(n);
  for (int i = 0; i < n; ++i) in.y(i) = z(rng);
  in.f.resize(n, r);
  for (int k = 0; k < r; ++k) {
    in.f.col(k) = in.y.array().pow(k + 1).matrix();
    in.f.col(k) /= in.f.col(k).norm() / std::sqrt(static_cast<double>(n));
  }
  const Matrix coef = oracle::gaussian(rng, r, p);
  const Matrix a = oracle::well_conditioned(rng, p);
  in.x = in.f * coef + oracle::gaussian(rng, n, p) * a.transpose();
  in.design = pfcred::build_design(in.x, in.f);
  return in;
}

}  // namespace fixtures
