#include "pfcred/report.hpp"

#include <cmath>
#include <cstdio>

namespace pfcred {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Json generator_json(const GeneratorParams& g) {
  return Json{{"name", to_string(g.name)}, {"n", g.n},   {"p", g.p},
              {"sigma_y", g.sigma_y},      {"seed", g.seed}, {"p1", g.p1}};
}

Json strings(const std::vector<std::string>& v) { return Json(v); }

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json matrix_rows(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json matrix_columns(const Matrix& m) { return matrix_rows(m.transpose()); }

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json to_json(const PfcFit& fit) {
  return Json{{"model", to_string(fit.model_kind)},
              {"d", fit.d},
              {"loglik", fit.loglik},
              {"mu_hat", vector_json(fit.mu_hat)},
              {"lambda_hat", vector_json(fit.lambda_hat)},
              {"reduction", matrix_columns(fit.reduction.basis())},
              {"projection", matrix_columns(fit.projection)},
              {"gamma", matrix_columns(fit.gamma_span.basis())},
              {"beta_hat", matrix_rows(fit.beta_hat)},
              {"delta_hat", matrix_rows(fit.delta_hat)},
              {"warnings", strings(fit.warnings)}};
}

Json to_json(const TestReport& report) {
  return Json{{"kind", to_string(report.kind)},
              {"statistic", report.statistic},
              {"df", report.df},
              {"p_value", report.p_value},
              {"reliable", report.reliable}};
}

Json to_json(const DimSelection& selection) {
  Json rows = Json::array();
  for (const auto& r : selection.per_w) {
    Json row{{"w", r.w}, {"loglik", r.loglik}};
    if (selection.method == DimMethod::Lrt) {
      row["statistic"] = r.statistic;
      row["df"] = r.df;
      row["p_value"] = r.p_value;
      row["rejected"] = r.rejected;
    } else {
      row["ic"] = r.statistic;
      row["parameters"] = r.df;
    }
    rows.push_back(std::move(row));
  }
  Json out{{"method", to_string(selection.method)}, {"chosen_d", selection.chosen_d}};
  if (selection.method == DimMethod::Lrt) out["alpha"] = selection.alpha;
  out["per_w"] = std::move(rows);
  return out;
}

Json to_json(const PredictorTest& test) {
  Json out = to_json(test.report);
  out["d"] = test.d;
  out["statistic_canonical"] = test.statistic_canonical;
  out["loglik_full"] = test.loglik_full;
  out["loglik_restricted"] = test.loglik_restricted;
  out["active"] = test.active;
  out["tested"] = test.tested;
  out["restricted_reduction"] = matrix_columns(test.restricted_subspace.basis());
  out["restricted_delta"] = matrix_rows(test.restricted_delta);
  return out;
}

Json to_json(const EliminationResult& result) {
  Json steps = Json::array();
  for (const auto& s : result.steps) steps.push_back(Json{{"removed", s.removed}, {"p_value", s.p_value}});
  return Json{{"kept", result.kept}, {"steps", std::move(steps)}};
}

Json to_json(const StructuredFit& fit) {
  return Json{{"d", fit.d},
              {"loglik", fit.loglik},
              {"delta_coeffs", vector_json(fit.delta_coeffs)},
              {"delta_tilde", matrix_rows(fit.delta_tilde)},
              {"reduction", matrix_columns(fit.subspace.basis())},
              {"iterations", fit.iterations},
              {"converged", fit.converged},
              {"gradient_norm", fit.gradient_norm},
              {"warnings", strings(fit.warnings)}};
}

Json to_json(const StructureTest& test) {
  Json out = to_json(test.report);
  out["w"] = test.w;
  out["loglik_unstructured"] = test.loglik_unstructured;
  out["fit"] = to_json(test.fit);
  return out;
}

Json to_json(const AngleStudy& study) {
  Json summary = Json::array();
  for (const auto& s : study.summary) {
    summary.push_back(Json{{"basis", s.basis},
                           {"valid", s.valid},
                           {"failed", s.failed},
                           {"mean", s.mean},
                           {"median", s.median},
                           {"q1", s.q1},
                           {"q3", s.q3}});
  }
  return Json{{"experiment", "angle"},
              {"generator", generator_json(study.gen)},
              {"reps", study.reps},
              {"summary", std::move(summary)}};
}

Json to_json(const DimStudy& study) {
  Json summary = Json::array();
  for (const auto& s : study.summary) {
    summary.push_back(Json{{"n", s.n},
                           {"p", s.p},
                           {"method", s.method},
                           {"valid", s.valid},
                           {"failed", s.failed},
                           {"F_d", s.f_exact},
                           {"F_d_d1", s.f_plus1},
                           {"F_d_d2", s.f_plus2},
                           {"under", s.f_under}});
  }
  return Json{{"experiment", "dim"},
              {"generator", generator_json(study.gen)},
              {"basis", study.basis},
              {"axis", study.axis == GridAxis::N ? "n" : "p"},
              {"grid", study.grid},
              {"reps", study.reps},
              {"true_d", study.true_d},
              {"alpha", study.alpha},
              {"summary", std::move(summary)}};
}

Json to_json(const LevelStudy& study) {
  Json summary = Json::array();
  for (const auto& s : study.summary) {
    summary.push_back(Json{{"n", s.n},
                           {"valid", s.valid},
                           {"failed", s.failed},
                           {"rejection", s.rejection},
                           {"non_rejection", s.non_rejection},
                           {"se", s.se}});
  }
  return Json{{"experiment", "level"},
              {"kind", to_string(study.kind)},
              {"generator", generator_json(study.gen)},
              {"basis", study.options.basis},
              {"d", study.options.d},
              {"alpha", study.options.alpha},
              {"grid", study.grid},
              {"reps", study.reps},
              {"summary", std::move(summary)}};
}

Json envelope(const std::string& kind, Json body) {
  Json out{{"schema", kSchema}, {"kind", kind}};
  for (auto& [key, value] : body.items()) out[key] = value;
  return out;
}

void write_csv(const AngleStudy& study, std::ostream& out) {
  out << "rep,basis,angle_deg,error\n";
  for (const auto& r : study.records) {
    out << r.rep << ',' << csv_field(r.basis) << ',' << format_number(r.angle_deg) << ','
        << csv_field(r.error) << '\n';
  }
}

void write_csv(const DimStudy& study, std::ostream& out) {
  out << "n,p,rep,method,chosen_d,error\n";
  for (const auto& r : study.records) {
    out << r.n << ',' << r.p << ',' << r.rep << ',' << r.method << ',' << r.chosen_d << ','
        << csv_field(r.error) << '\n';
  }
}

void write_csv(const LevelStudy& study, std::ostream& out) {
  out << "n,rep,statistic,df,p_value,reject,reliable,error\n";
  for (const auto& r : study.records) {
    out << r.n << ',' << r.rep << ',' << format_number(r.statistic) << ',' << r.df << ','
        << format_number(r.p_value) << ',' << (r.reject ? 1 : 0) << ',' << (r.reliable ? 1 : 0) << ','
        << csv_field(r.error) << '\n';
  }
}

}  // namespace pfcred
