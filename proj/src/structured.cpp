#include "pfcred/structured.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace pfcred {

namespace {

Matrix unit_sym(int p, int i, int j) {
  Matrix g = Matrix::Zero(p, p);
  g(i, j) = 1.0;
  g(j, i) = 1.0;
  return g;
}

// Delta and the pieces of the score that depend on it.
struct DeltaState {
  Matrix delta;
  bool spd = false;
  double loglik = -std::numeric_limits<double>::infinity();
  // SigmaRes + sum_{i>d} lambda_i Delta^{1/2} u_i u_i^T Delta^{1/2}
  Matrix target;
};

DeltaState evaluate(const DesignMatrices& design, int d, const Matrix& delta, bool need_target) {
  DeltaState st;
  st.delta = symmetrize(delta);
  Eigen::SelfAdjointEigenSolver<Matrix> es(st.delta);
  if (es.info() != Eigen::Success) return st;
  const Vector ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-12 * std::max(ev.maxCoeff(), 0.0)) || ev.maxCoeff() <= 0.0) return st;
  st.spd = true;
  st.loglik = loglik_at_delta(design, d, st.delta);
  if (!need_target) return st;
  const Matrix& v = es.eigenvectors();
  const Matrix half = v * ev.cwiseSqrt().asDiagonal() * v.transpose();
  const Matrix inv_half = v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  const SymEigen fit = eig_sym_desc(inv_half * design.SigmaFit * inv_half);
  st.target = design.SigmaRes;
  for (int i = d; i < design.tau(); ++i) {
    const double lambda = std::max(fit.values(i), 0.0);
    const Vector w = half * fit.vectors.col(i);
    st.target.noalias() += lambda * w * w.transpose();
  }
  st.target = symmetrize(st.target);
  return st;
}

Vector project_coeffs(const DeltaStructure& s, const Eigen::LDLT<Matrix>& gram, const Matrix& target) {
  const Eigen::Map<const Vector> vec(target.data(), target.size());
  return gram.solve(s.stacked().transpose() * vec);
}

}  // namespace

DeltaStructure::DeltaStructure(Kind kind, std::vector<Matrix> basis, std::string label)
    : kind_(kind), basis_(std::move(basis)), label_(std::move(label)) {
  if (basis_.empty()) throw Error(ErrorKind::InvalidInput, "structure needs at least one matrix");
  p_ = static_cast<int>(basis_.front().rows());
  if (p_ < 1) throw Error(ErrorKind::InvalidInput, "structure matrices are empty");
  if (m() > p_ * (p_ + 1) / 2) {
    throw Error(ErrorKind::InvalidInput, "more structure matrices than free entries of a symmetric matrix");
  }
  stacked_.resize(static_cast<Eigen::Index>(p_) * p_, m());
  for (int i = 0; i < m(); ++i) {
    const Matrix& g = basis_[static_cast<std::size_t>(i)];
    if (g.rows() != p_ || g.cols() != p_) {
      throw Error(ErrorKind::InvalidInput, "structure matrix " + std::to_string(i + 1) + " is not p x p");
    }
    if (!g.allFinite()) throw Error(ErrorKind::InvalidInput, "structure matrix has non-finite entries");
    const double scale = std::max(g.cwiseAbs().maxCoeff(), 1.0);
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw Error(ErrorKind::InvalidInput, "structure matrix " + std::to_string(i + 1) + " is not symmetric");
    }
    stacked_.col(i) = Eigen::Map<const Vector>(g.data(), g.size());
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(stacked_);
  qr.setThreshold(1e-10);
  if (qr.rank() < m()) throw Error(ErrorKind::InvalidInput, "structure matrices are linearly dependent");
}

DeltaStructure DeltaStructure::diagonal(int p) {
  if (p < 1) throw Error(ErrorKind::InvalidInput, "p must be positive");
  std::vector<Matrix> g;
  for (int i = 0; i < p; ++i) g.push_back(unit_sym(p, i, i));
  return DeltaStructure(Kind::Diagonal, std::move(g), "diag");
}

DeltaStructure DeltaStructure::grouped_diagonal(const std::vector<std::string>& labels) {
  const int p = static_cast<int>(labels.size());
  if (p < 1) throw Error(ErrorKind::InvalidInput, "group map is empty");
  std::map<std::string, std::size_t> index;
  std::vector<Matrix> g;
  for (int i = 0; i < p; ++i) {
    auto [it, inserted] = index.emplace(labels[static_cast<std::size_t>(i)], g.size());
    if (inserted) g.push_back(Matrix::Zero(p, p));
    g[it->second](i, i) = 1.0;
  }
  std::string label = "groups=";
  for (int i = 0; i < p; ++i) label += (i ? "," : "") + labels[static_cast<std::size_t>(i)];
  return DeltaStructure(Kind::GroupedDiagonal, std::move(g), label);
}

DeltaStructure DeltaStructure::equicorrelated(int p) {
  if (p < 2) throw Error(ErrorKind::InvalidInput, "equicorrelated structure needs p >= 2");
  return DeltaStructure(Kind::Equicorrelated, {Matrix::Identity(p, p), Matrix::Ones(p, p)}, "equicorr");
}

DeltaStructure DeltaStructure::custom(std::vector<Matrix> basis) {
  return DeltaStructure(Kind::Custom, std::move(basis), "custom");
}

DeltaStructure DeltaStructure::unrestricted(int p) {
  if (p < 1) throw Error(ErrorKind::InvalidInput, "p must be positive");
  std::vector<Matrix> g;
  for (int j = 0; j < p; ++j) {
    for (int i = j; i < p; ++i) g.push_back(unit_sym(p, i, j));
  }
  return DeltaStructure(Kind::Custom, std::move(g), "unrestricted");
}

DeltaStructure DeltaStructure::parse(std::string_view text, int p) {
  if (text == "diag") return diagonal(p);
  if (text == "equicorr") return equicorrelated(p);
  if (text.starts_with("groups=")) {
    std::vector<std::string> labels;
    std::stringstream ss{std::string(text.substr(7))};
    std::string item;
    while (std::getline(ss, item, ',')) labels.push_back(item);
    if (static_cast<int>(labels.size()) != p) {
      throw Error(ErrorKind::InvalidInput, "group map has " + std::to_string(labels.size()) +
                                               " labels for p = " + std::to_string(p));
    }
    return grouped_diagonal(labels);
  }
  if (text.starts_with("custom=")) return custom(load_structure_matrices(std::string(text.substr(7)), p));
  throw Error(ErrorKind::InvalidInput, "unknown Delta structure '" + std::string(text) + "'");
}

Matrix DeltaStructure::assemble(const Vector& coeffs) const {
  if (coeffs.size() != m()) throw Error(ErrorKind::InvalidInput, "coefficient count does not match the structure");
  Matrix out = Matrix::Zero(p_, p_);
  for (int i = 0; i < m(); ++i) out += coeffs(i) * basis_[static_cast<std::size_t>(i)];
  return out;
}

std::string DeltaStructure::describe() const { return label_; }

std::vector<Matrix> load_structure_matrices(const std::string& path, int p) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open '" + path + "'");
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
      throw Error(ErrorKind::ParseError, "'" + token + "' in '" + path + "' is not a number");
    }
    values.push_back(v);
  }
  const std::size_t block = static_cast<std::size_t>(p) * static_cast<std::size_t>(p);
  if (values.empty() || values.size() % block != 0) {
    throw Error(ErrorKind::ParseError, "'" + path + "' holds " + std::to_string(values.size()) +
                                           " numbers, not a whole number of " + std::to_string(p) + " x " +
                                           std::to_string(p) + " blocks");
  }
  std::vector<Matrix> out;
  for (std::size_t off = 0; off < values.size(); off += block) {
    Matrix g(p, p);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) g(i, j) = values[off + static_cast<std::size_t>(i * p + j)];
    }
    out.push_back(std::move(g));
  }
  return out;
}

Vector structured_score(const DesignMatrices& design, int d, const DeltaStructure& structure,
                        const Vector& coeffs) {
  const DeltaState st = evaluate(design, d, structure.assemble(coeffs), true);
  if (!st.spd) throw Error(ErrorKind::NotPSD, "Delta is not positive definite");
  const Matrix diff = st.delta - st.target;
  return structure.stacked().transpose() * Eigen::Map<const Vector>(diff.data(), diff.size());
}

StructuredFit fit_structured(const DesignMatrices& design, int d, const DeltaStructure& structure,
                             const StructuredOptions& opts) {
  if (d < 1 || d > design.tau()) {
    throw Error(ErrorKind::InvalidInput, "d must satisfy 1 <= d <= min(r, p) = " + std::to_string(design.tau()));
  }
  if (structure.p() != design.p) {
    throw Error(ErrorKind::InvalidInput, "structure is for p = " + std::to_string(structure.p()) +
                                             ", data have p = " + std::to_string(design.p));
  }
  if (!(opts.tol > 0.0) || opts.max_iter < 0) throw Error(ErrorKind::InvalidInput, "bad iteration options");

  const Matrix& gt = structure.stacked();
  const Eigen::LDLT<Matrix> gram(gt.transpose() * gt);

  Vector delta = project_coeffs(structure, gram, design.SigmaRes);
  DeltaState state = evaluate(design, d, structure.assemble(delta), true);
  if (!state.spd) {
    throw Error(ErrorKind::NotPSD, "the starting Delta for structure '" + structure.describe() +
                                       "' is not positive definite; try a different structure");
  }

  StructuredFit fit;
  fit.d = d;
  if (d >= design.tau()) {
    // No trailing eigenvalues: the starting value is the maximizer.
    fit.converged = true;
  } else {
    for (int it = 1; it <= opts.max_iter; ++it) {
      const Vector proposal = project_coeffs(structure, gram, state.target);
      const Vector step = proposal - delta;
      const double floor = state.loglik - 1e-12 * std::max(1.0, std::abs(state.loglik));
      double t = 1.0;
      bool accepted = false;
      bool any_spd = false;
      Vector candidate;
      DeltaState next;
      for (int halving = 0; halving <= 20; ++halving, t *= 0.5) {
        candidate = delta + t * step;
        next = evaluate(design, d, structure.assemble(candidate), true);
        any_spd = any_spd || next.spd;
        if (next.spd && next.loglik >= floor) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (!any_spd) {
          throw Error(ErrorKind::IterationDiverged,
                      "Delta lost positive definiteness at iteration " + std::to_string(it));
        }
        fit.warnings.emplace_back("NotConverged: step damping found no likelihood increase at iteration " +
                                  std::to_string(it));
        fit.iterations = it;
        break;
      }
      const double change = (candidate - delta).norm() / std::max(delta.norm(), 1e-300);
      delta = candidate;
      state = std::move(next);
      fit.iterations = it;
      if (change < opts.tol) {
        fit.converged = true;
        break;
      }
    }
    if (!fit.converged && fit.warnings.empty()) {
      fit.warnings.emplace_back("NotConverged: reached " + std::to_string(opts.max_iter) + " iterations");
    }
  }

  fit.delta_coeffs = delta;
  fit.delta_tilde = structure.assemble(delta);
  fit.loglik = state.loglik;
  fit.subspace = sd_subspace(fit.delta_tilde, design.SigmaFit, d);
  {
    const Matrix diff = state.delta - state.target;
    const Vector score = gt.transpose() * Eigen::Map<const Vector>(diff.data(), diff.size());
    fit.gradient_norm = score.cwiseAbs().maxCoeff();
  }

  // The inverse should lie in the same span.
  const Matrix inv = sym_power(fit.delta_tilde, SymPower::Inverse);
  const Eigen::Map<const Vector> vinv(inv.data(), inv.size());
  const Vector s = gram.solve(gt.transpose() * vinv);
  const double residual = (vinv - gt * s).norm() / vinv.norm();
  if (residual > 1e-6) {
    std::ostringstream msg;
    msg << "ClosureViolation: the inverse of the fitted Delta is outside the structure (relative residual "
        << residual << ")";
    fit.warnings.push_back(msg.str());
  }
  return fit;
}

StructureTest test_structure(const DesignMatrices& design, const DeltaStructure& structure, int w,
                             const StructuredOptions& opts) {
  const int p = design.p;
  const int df = p * (p + 1) / 2 - structure.m();
  if (df <= 0) {
    throw Error(ErrorKind::InvalidInput, "structure spans all symmetric matrices; nothing to test");
  }
  if (w < 0) w = design.tau();
  StructureTest out;
  out.w = w;
  out.fit = fit_structured(design, w, structure, opts);
  out.loglik_unstructured = loglik_from_spectrum(design, w);
  out.report = make_report(TestKind::Structure, out.loglik_unstructured, out.fit.loglik, df);
  out.report.reliable = out.fit.converged;
  return out;
}

}  // namespace pfcred
