#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace oracle {

namespace {

constexpr double kPi = 3.14159265358979323846;

Matrix center(const Matrix& a) { return a.rowwise() - a.colwise().mean(); }

int packed_size(int p) { return p * (p + 1) / 2; }

Matrix unpack(const Vector& theta, int p) {
  Matrix l = Matrix::Zero(p, p);
  int k = 0;
  for (int j = 0; j < p; ++j) {
    for (int i = j; i < p; ++i) l(i, j) = (i == j) ? std::exp(theta(k++)) : theta(k++);
  }
  return l * l.transpose();
}

Vector pack(const Matrix& delta) {
  const int p = static_cast<int>(delta.rows());
  const Matrix l = delta.llt().matrixL();
  Vector theta(packed_size(p));
  int k = 0;
  for (int j = 0; j < p; ++j) {
    for (int i = j; i < p; ++i) theta(k++) = (i == j) ? std::log(l(i, j)) : l(i, j);
  }
  return theta;
}

}  // namespace

Moments moments(const Matrix& x, const Matrix& f) {
  const Matrix xc = center(x);
  const Matrix fc = center(f);
  const int n = static_cast<int>(x.rows());
  const Matrix hat = fc * (fc.transpose() * fc).inverse() * fc.transpose();
  Moments m;
  m.n = n;
  m.sigma = xc.transpose() * xc / n;
  m.fit = xc.transpose() * hat * xc / n;
  m.fit = 0.5 * (m.fit + m.fit.transpose());
  m.res = m.sigma - m.fit;
  return m;
}

double profile_loglik(const Moments& m, int d, const Matrix& delta) {
  const int p = static_cast<int>(delta.rows());
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(m.fit, delta);
  Vector lam = ges.eigenvalues();  // ascending
  double tail = 0.0;
  for (int i = 0; i < p - d; ++i) tail += lam(i);
  const double logdet = std::log(delta.determinant());
  const double tr = delta.llt().solve(m.res).trace();
  const double n = m.n;
  return -0.5 * n * p * std::log(2.0 * kPi) - 0.5 * n * logdet - 0.5 * n * tr - 0.5 * n * tail;
}

MaxResult maximize_profile(const Moments& m, int d, std::uint64_t seed) {
  const int p = static_cast<int>(m.sigma.rows());
  const int k = packed_size(p);
  MaxResult best;
  best.value = -std::numeric_limits<double>::infinity();

  auto objective = [&](const Vector& th) {
    ++best.evaluations;
    const double v = profile_loglik(m, d, unpack(th, p)) / m.n;
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };
  auto gradient = [&](const Vector& th) {
    Vector g(k);
    for (int i = 0; i < k; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(th(i)));
      Vector a = th, b = th;
      a(i) += h;
      b(i) -= h;
      g(i) = (objective(a) - objective(b)) / (2 * h);
    }
    return g;
  };

  std::mt19937_64 rng(seed);
  std::vector<Matrix> starts{m.sigma, m.res, Matrix::Identity(p, p) * (m.sigma.trace() / p)};
  for (int s = 0; s < 2; ++s) {
    const Matrix a = gaussian(rng, p, p);
    starts.push_back(a * a.transpose() / p + m.res);
  }

  for (const Matrix& start : starts) {
    Vector th = pack(start);
    double fx = objective(th);
    Vector g = gradient(th);
    Matrix h = Matrix::Identity(k, k);
    for (int it = 0; it < 400 && g.norm() > 1e-10; ++it) {
      Vector dir = -h * g;
      if (dir.dot(g) >= 0) {
        h.setIdentity();
        dir = -g;
      }
      double step = 1.0;
      Vector next;
      double fn = 0.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
        next = th + step * dir;
        fn = objective(next);
        if (fn <= fx + 1e-4 * step * g.dot(dir)) {
          moved = true;
          break;
        }
      }
      if (!moved) break;
      const Vector gn = gradient(next);
      const Vector s = next - th;
      const Vector y = gn - g;
      const double sy = s.dot(y);
      if (sy > 1e-14) {
        const double rho = 1.0 / sy;
        const Matrix i = Matrix::Identity(k, k);
        h = (i - rho * s * y.transpose()) * h * (i - rho * y * s.transpose()) + rho * s * s.transpose();
      }
      th = next;
      g = gn;
      if (std::abs(fx - fn) < 1e-15 * std::max(1.0, std::abs(fx))) {
        fx = fn;
        break;
      }
      fx = fn;
    }
    const double value = -fx * m.n;
    if (value > best.value) {
      best.value = value;
      best.delta = unpack(th, p);
    }
  }
  return best;
}

Matrix sir_directions(const Matrix& x, const Vector& y, int slices, int d) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return y(a) < y(b); });
  const Vector mean = x.colwise().mean();
  Matrix m = Matrix::Zero(p, p);
  int pos = 0;
  for (int h = 0; h < slices; ++h) {
    const int size = n / slices + (h < n % slices ? 1 : 0);
    Vector sm = Vector::Zero(p);
    for (int i = 0; i < size; ++i) sm += x.row(order[static_cast<std::size_t>(pos + i)]).transpose();
    sm /= size;
    pos += size;
    m += (static_cast<double>(size) / n) * (sm - mean) * (sm - mean).transpose();
  }
  const Matrix xc = center(x);
  const Matrix sigma = xc.transpose() * xc / n;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(m, sigma);
  // Generalized eigenvectors of (M, Sigma) are eigenvectors of Sigma^{-1} M.
  return ges.eigenvectors().rightCols(d);
}

double max_angle(const Matrix& a, const Matrix& b) {
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(b.rows(), b.cols());
  const Vector s = Eigen::JacobiSVD<Matrix>(qa.transpose() * qb).singularValues();
  const double smin = std::clamp(s.minCoeff(), -1.0, 1.0);
  // asin of the residual norm is accurate for tiny angles where acos is not.
  const Matrix resid = qb - qa * (qa.transpose() * qb);
  const double sres = std::min(1.0, Eigen::JacobiSVD<Matrix>(resid).singularValues().maxCoeff());
  return smin > 0.7 ? std::asin(sres) : std::acos(smin);
}

double chi2_sf(double x, int df) { return boost::math::gamma_q(0.5 * df, 0.5 * x); }

double predictor_test_exact_level(int n, int p1, int p2, double alpha) {
  const double crit = boost::math::quantile(boost::math::complement(boost::math::chi_squared(p2), alpha));
  // Theta = -n log Lambda with Lambda ~ Wilks(p2, 1, n - p1 - 2).
  const double lambda = std::exp(-crit / n);
  const double df2 = n - p1 - p2 - 1;
  const double f = (1.0 - lambda) / lambda * df2 / p2;
  return boost::math::cdf(boost::math::complement(boost::math::fisher_f(p2, df2), f));
}

double expected_random_angle_deg(int p) {
  boost::math::quadrature::tanh_sinh<double> q;
  const double e = 0.5 * (p - 3);
  auto w = [e](double t) { return std::pow(1.0 - t * t, e); };
  const double num = q.integrate([&](double t) { return std::acos(t) * w(t); }, 0.0, 1.0);
  const double den = q.integrate(w, 0.0, 1.0);
  return num / den * 180.0 / kPi;
}

Matrix gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix a(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) a(i, j) = z(rng);
  }
  return a;
}

Matrix well_conditioned(std::mt19937_64& rng, int p) {
  const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian(rng, p, p)).householderQ();
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Vector s(p);
  for (int i = 0; i < p; ++i) s(i) = u(rng);
  return q * s.asDiagonal();
}

}  // namespace oracle
