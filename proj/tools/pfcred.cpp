// pfcred: principal fitted components from the command line.
//
// Results go to stdout (or --output); diagnostics go to stderr.
// Exit codes: 0 ok, 2 input error, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "pfcred/report.hpp"

namespace {

using namespace pfcred;

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct DataOptions {
  std::string path;
  std::string response = "y";
  std::vector<std::string> predictors;
  bool categorical = false;
  std::string basis = "poly:1";
  std::string output;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("--data", o.path, "CSV file with a header row")->required();
  cmd->add_option("--response", o.response, "response column")->capture_default_str();
  cmd->add_option("--predictors", o.predictors, "predictor columns (default: all others)")->delimiter(',');
  cmd->add_flag("--categorical", o.categorical, "treat the response as categorical");
  cmd->add_option("--basis", o.basis, "poly:K, slices:H, categorical or pw:H:K")->capture_default_str();
  cmd->add_option("--output", o.output, "write the result here instead of stdout");
}

struct Loaded {
  Dataset data;
  BasisSpec basis;
  DesignMatrices design;
};

Loaded load(const DataOptions& o) {
  Dataset data = load_csv(o.path, o.response, o.predictors, o.categorical);
  BasisSpec basis = BasisSpec::parse(o.basis);
  DesignMatrices design = build_design(data, basis);
  return {std::move(data), std::move(basis), std::move(design)};
}

Json data_json(const Loaded& l) {
  return Json{{"basis", l.basis.describe()},
              {"n", l.design.n},
              {"p", l.design.p},
              {"r", l.design.r},
              {"response", l.data.response_name},
              {"predictors", l.data.predictor_names}};
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write '" + path + "'");
  out << text;
}

void echo_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::vector<int> predictor_indices(const Dataset& data, const std::vector<std::string>& names) {
  std::vector<int> out;
  for (const auto& name : names) {
    const auto it = std::find(data.predictor_names.begin(), data.predictor_names.end(), name);
    if (it == data.predictor_names.end()) {
      throw Error(ErrorKind::InvalidInput, "'" + name + "' is not one of the predictors");
    }
    out.push_back(static_cast<int>(it - data.predictor_names.begin()));
  }
  return out;
}

struct FitOptions {
  int d = 0;
  std::string model = "pfc";
  std::string delta;
  double tol = 1e-9;
  int max_iter = 500;
};

void add_fit_options(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("--d", o.d, "dimension of the reduction")->required();
  cmd->add_option("--model", o.model, "pfc, pc or isotonic")
      ->check(CLI::IsMember({"pfc", "pc", "isotonic"}))
      ->capture_default_str();
  cmd->add_option("--delta", o.delta, "Delta structure: diag, equicorr, groups=..., custom=<file>");
  cmd->add_option("--tol", o.tol, "convergence tolerance for structured fits")->capture_default_str();
  cmd->add_option("--max-iter", o.max_iter, "iteration limit for structured fits")->capture_default_str();
}

PfcFit fit_model(const DesignMatrices& design, const FitOptions& o) {
  if (o.model == "pc") return fit_pc(design, o.d);
  if (o.model == "isotonic") return fit_isotonic_pfc(design, o.d);
  return fit_pfc(design, o.d);
}

std::optional<StructuredFit> fit_with_structure(const DesignMatrices& design, const FitOptions& o) {
  if (o.delta.empty()) return std::nullopt;
  if (o.model != "pfc") throw Error(ErrorKind::InvalidInput, "--delta applies only to --model pfc");
  if (o.d < 1 || o.d > design.tau()) {
    throw Error(ErrorKind::InvalidInput, "d = " + std::to_string(o.d) + " outside 1..min(r, p) = " +
                                             std::to_string(design.tau()) +
                                             (o.d == 0 ? "; use select-d to test d = 0" : ""));
  }
  return fit_structured(design, o.d, DeltaStructure::parse(o.delta, design.p), {o.tol, o.max_iter});
}

int cmd_fit(const DataOptions& data, const FitOptions& fo) {
  const Loaded l = load(data);
  Json body = data_json(l);
  if (auto sf = fit_with_structure(l.design, fo)) {
    echo_warnings(sf->warnings);
    body["delta_structure"] = fo.delta;
    body["fit"] = to_json(*sf);
    emit(data.output, envelope("structured_fit", std::move(body)).dump(2) + "\n");
    return 0;
  }
  const PfcFit fit = fit_model(l.design, fo);
  echo_warnings(fit.warnings);
  body["fit"] = to_json(fit);
  emit(data.output, envelope("fit", std::move(body)).dump(2) + "\n");
  return 0;
}

int cmd_reduce(const DataOptions& data, const FitOptions& fo, const std::string& newdata) {
  const Loaded l = load(data);
  const Matrix x = newdata.empty() ? l.data.X : load_predictors_csv(newdata, l.data.predictor_names);
  Matrix coords;
  if (auto sf = fit_with_structure(l.design, fo)) {
    echo_warnings(sf->warnings);
    coords = x * sf->subspace.basis();
  } else {
    const PfcFit fit = fit_model(l.design, fo);
    echo_warnings(fit.warnings);
    coords = reduce(fit, x);
  }
  std::string out;
  for (Eigen::Index j = 0; j < coords.cols(); ++j) out += (j ? ",R" : "R") + std::to_string(j + 1);
  out += '\n';
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    for (Eigen::Index j = 0; j < coords.cols(); ++j) out += (j ? "," : "") + format_number(coords(i, j));
    out += '\n';
  }
  emit(data.output, out);
  return 0;
}

int cmd_select_d(const DataOptions& data, const std::string& method, double alpha) {
  const Loaded l = load(data);
  Json body = data_json(l);
  Json selections = Json::array();
  if (method == "lrt" || method == "all") selections.push_back(to_json(select_d_lrt(l.design, alpha)));
  if (method == "aic" || method == "all") selections.push_back(to_json(select_d_ic(l.design, DimMethod::Aic)));
  if (method == "bic" || method == "all") selections.push_back(to_json(select_d_ic(l.design, DimMethod::Bic)));
  if (selections.size() == 1) {
    for (auto& [key, value] : selections[0].items()) body[key] = value;
  } else {
    body["selections"] = std::move(selections);
  }
  emit(data.output, envelope("select_d", std::move(body)).dump(2) + "\n");
  return 0;
}

struct PredictorOptions {
  std::optional<int> d;
  std::vector<std::string> test;
  bool each = false;
  bool backward = false;
  double alpha = 0.05;
};

int cmd_test_predictors(const DataOptions& data, const PredictorOptions& po) {
  const Loaded l = load(data);
  Json body = data_json(l);
  const int p = l.design.p;
  if (po.backward) {
    if (!po.d) throw Error(ErrorKind::InvalidInput, "--backward needs --d");
    EliminationResult result = backward_eliminate(l.design, *po.d, po.alpha);
    Json j = to_json(result);
    Json kept = Json::array();
    for (int k : result.kept) kept.push_back(l.data.predictor_names[static_cast<std::size_t>(k)]);
    j["kept_names"] = std::move(kept);
    j["alpha"] = po.alpha;
    body["elimination"] = std::move(j);
    emit(data.output, envelope("backward_elimination", std::move(body)).dump(2) + "\n");
    return 0;
  }
  std::vector<std::vector<int>> tested_sets;
  if (po.each) {
    for (int k = 0; k < p; ++k) tested_sets.push_back({k});
  } else {
    if (po.test.empty()) throw Error(ErrorKind::InvalidInput, "name the predictors to test with --test, or use --each");
    tested_sets.push_back(predictor_indices(l.data, po.test));
  }
  Json tests = Json::array();
  for (const auto& tested : tested_sets) {
    std::vector<int> active;
    for (int k = 0; k < p; ++k) {
      if (std::find(tested.begin(), tested.end(), k) == tested.end()) active.push_back(k);
    }
    const PredictorTest t = po.d ? test_predictors(l.design, *po.d, active) : test_predictors_maxw(l.design, active);
    Json j = to_json(t);
    Json names = Json::array();
    for (int k : t.tested) names.push_back(l.data.predictor_names[static_cast<std::size_t>(k)]);
    j["tested_names"] = std::move(names);
    tests.push_back(std::move(j));
  }
  if (tests.size() == 1) {
    for (auto& [key, value] : tests[0].items()) body[key] = value;
  } else {
    body["tests"] = std::move(tests);
  }
  emit(data.output, envelope("test_predictors", std::move(body)).dump(2) + "\n");
  return 0;
}

int cmd_test_structure(const DataOptions& data, const std::string& delta, int w, double tol, int max_iter) {
  const Loaded l = load(data);
  const StructureTest t = test_structure(l.design, DeltaStructure::parse(delta, l.design.p), w, {tol, max_iter});
  echo_warnings(t.fit.warnings);
  if (!t.report.reliable) std::cerr << "warning: structured fit did not converge; the test is unreliable\n";
  Json body = data_json(l);
  body["delta_structure"] = delta;
  const Json test = to_json(t);
  for (const auto& [key, value] : test.items()) body[key] = value;
  emit(data.output, envelope("test_structure", std::move(body)).dump(2) + "\n");
  return 0;
}

struct SimOptions {
  std::string experiment;
  int reps = 100;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::vector<int> n;
  std::vector<int> p;
  std::optional<double> sigma_y;
  std::optional<std::string> basis;
  int r = 1;
  int threads = 0;
};

template <class Study>
int finish_simulation(const SimOptions& so, const Study& study, std::size_t records, std::size_t failures) {
  namespace fs = std::filesystem;
  fs::create_directories(so.out_dir);
  const std::string stem = so.experiment + "_" + std::to_string(so.seed);
  const fs::path csv = fs::path(so.out_dir) / (stem + ".csv");
  const fs::path json = fs::path(so.out_dir) / (stem + ".json");
  {
    std::ofstream out(csv);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write '" + csv.string() + "'");
    write_csv(study, out);
  }
  Json body = to_json(study);
  body["failed_records"] = failures;
  body["records"] = records;
  const std::string text = envelope("simulation", std::move(body)).dump(2) + "\n";
  {
    std::ofstream out(json);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write '" + json.string() + "'");
    out << text;
  }
  std::cout << text;
  std::cerr << "wrote " << csv.string() << " and " << json.string() << '\n';
  if (failures * 20 > records) {
    std::cerr << "error: " << failures << " of " << records << " replications failed\n";
    return kExitNumeric;
  }
  if (failures > 0) std::cerr << "warning: " << failures << " of " << records << " replications failed\n";
  return 0;
}

template <class Records>
std::size_t count_failures(const Records& records) {
  std::size_t k = 0;
  for (const auto& r : records) k += r.error.empty() ? 0 : 1;
  return k;
}

int cmd_simulate(SimOptions so) {
  if (so.reps < 1) throw Error(ErrorKind::InvalidInput, "--reps must be positive");
  GeneratorParams gen;
  gen.seed = so.seed;
  auto first_or = [](const std::vector<int>& v, int fallback) { return v.empty() ? fallback : v.front(); };

  if (so.experiment == "fig1") {
    gen.name = GeneratorName::Fig1ExpNu;
    gen.n = first_or(so.n, 200);
    gen.p = first_or(so.p, 20);
    std::vector<NamedBasis> bases;
    for (int k = 1; k <= 6; ++k) bases.push_back(named_basis("poly:" + std::to_string(k)));
    bases.push_back(exp_basis());
    const AngleStudy s = run_angle_study(gen, bases, so.reps, so.threads);
    return finish_simulation(so, s, s.records.size(), count_failures(s.records));
  }
  if (so.experiment == "dim-study") {
    gen.name = GeneratorName::Sec5TwoDim;
    gen.sigma_y = so.sigma_y.value_or(2.0);
    const bool by_p = so.p.size() > 1;
    gen.n = first_or(so.n, 200);
    gen.p = first_or(so.p, 5);
    const std::vector<int> grid = by_p ? so.p : (so.n.empty() ? std::vector<int>{200} : so.n);
    const DimStudy s = run_dim_study(gen, named_basis(so.basis.value_or("abs:3")), by_p ? GridAxis::P : GridAxis::N,
                                     grid, so.reps, 0.05, so.threads);
    return finish_simulation(so, s, s.records.size(), count_failures(s.records));
  }
  if (so.experiment == "predictor-levels" || so.experiment == "structure-levels" ||
      so.experiment == "lrt-levels") {
    LevelOptions opts;
    LevelKind kind = LevelKind::Predictor;
    std::vector<int> grid;
    if (so.experiment == "predictor-levels") {
      gen.name = GeneratorName::Sec6NullTest;
      gen.p = first_or(so.p, 10);
      gen.p1 = 7;
      gen.sigma_y = so.sigma_y.value_or(1.0);
      opts.basis = so.basis.value_or("poly:1");
      opts.d = 1;
      grid = so.n.empty() ? std::vector<int>{20, 40, 100, 120} : so.n;
    } else if (so.experiment == "structure-levels") {
      kind = LevelKind::Structure;
      gen.name = GeneratorName::Sec8DiagDelta;
      gen.p = first_or(so.p, 6);
      opts.basis = so.basis.value_or("poly:" + std::to_string(so.r));
      grid = so.n.empty() ? std::vector<int>{50, 100, 200, 400, 800} : so.n;
    } else {
      kind = LevelKind::LrtDim;
      gen.name = GeneratorName::Sec5TwoDim;
      gen.p = first_or(so.p, 5);
      gen.sigma_y = so.sigma_y.value_or(2.0);
      opts.basis = so.basis.value_or("abs:3");
      opts.d = 2;
      grid = so.n.empty() ? std::vector<int>{500} : so.n;
    }
    const LevelStudy s = run_level_study(kind, gen, grid, so.reps, opts, so.threads);
    return finish_simulation(so, s, s.records.size(), count_failures(s.records));
  }
  throw Error(ErrorKind::InvalidInput, "unknown experiment '" + so.experiment + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Principal fitted components: sufficient reductions, dimension selection and tests"};
  app.require_subcommand(1);

  DataOptions data;
  FitOptions fit_opts;
  std::string newdata;
  std::string method = "lrt";
  double alpha = 0.05;
  PredictorOptions pred;
  std::string delta;
  int w = -1;
  double tol = 1e-9;
  int max_iter = 500;
  SimOptions sim;

  auto* fit = app.add_subcommand("fit", "fit the model for a given d and print the estimates as JSON");
  add_data_options(fit, data);
  add_fit_options(fit, fit_opts);

  auto* red = app.add_subcommand("reduce", "print the reduction coordinates as CSV");
  add_data_options(red, data);
  add_fit_options(red, fit_opts);
  red->add_option("--newdata", newdata, "CSV of observations to reduce (default: the training data)");

  auto* sel = app.add_subcommand("select-d", "choose the dimension by sequential LRT, AIC or BIC");
  add_data_options(sel, data);
  sel->add_option("--method", method, "lrt, aic, bic or all")
      ->check(CLI::IsMember({"lrt", "aic", "bic", "all"}))
      ->capture_default_str();
  sel->add_option("--alpha", alpha, "level of each sequential test")->capture_default_str();

  auto* tp = app.add_subcommand("test-predictors", "test that some predictors are irrelevant given the rest");
  add_data_options(tp, data);
  tp->add_option("--d", pred.d, "dimension (default: min(r, number of kept predictors))");
  tp->add_option("--test", pred.test, "predictors to test")->delimiter(',');
  tp->add_flag("--each", pred.each, "test every predictor on its own");
  tp->add_flag("--backward", pred.backward, "backward elimination at level --alpha");
  tp->add_option("--alpha", pred.alpha, "level for backward elimination")->capture_default_str();

  auto* ts = app.add_subcommand("test-structure", "test a linear structure for Delta");
  add_data_options(ts, data);
  ts->add_option("--delta", delta, "diag, equicorr, groups=..., custom=<file>")->required();
  ts->add_option("--w", w, "working dimension (default: min(r, p))");
  ts->add_option("--tol", tol, "convergence tolerance")->capture_default_str();
  ts->add_option("--max-iter", max_iter, "iteration limit")->capture_default_str();

  auto* sm = app.add_subcommand("simulate", "run a simulation study and write <experiment>_<seed>.{csv,json}");
  sm->add_option("--experiment", sim.experiment, "fig1, dim-study, predictor-levels, structure-levels, lrt-levels")
      ->required();
  sm->add_option("--reps", sim.reps, "replications")->capture_default_str();
  sm->add_option("--seed", sim.seed, "master seed")->capture_default_str();
  sm->add_option("--out-dir", sim.out_dir, "directory for the result files")->capture_default_str();
  sm->add_option("--n", sim.n, "sample size(s)")->delimiter(',');
  sm->add_option("--p", sim.p, "number(s) of predictors")->delimiter(',');
  sm->add_option("--sigma-y", sim.sigma_y, "standard deviation of the response");
  sm->add_option("--basis", sim.basis, "fitting basis");
  sm->add_option("--r", sim.r, "polynomial degree for structure-levels")->capture_default_str();
  sm->add_option("--threads", sim.threads, "worker threads (default: PFCRED_THREADS or all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (fit->parsed()) return cmd_fit(data, fit_opts);
    if (red->parsed()) return cmd_reduce(data, fit_opts, newdata);
    if (sel->parsed()) return cmd_select_d(data, method, alpha);
    if (tp->parsed()) return cmd_test_predictors(data, pred);
    if (ts->parsed()) return cmd_test_structure(data, delta, w, tol, max_iter);
    if (sm->parsed()) return cmd_simulate(sim);
  } catch (const Error& e) {
    std::cerr << "pfcred: " << e.what() << '\n';
    return is_input_error(e.kind()) ? kExitInput : kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "pfcred: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitInput;
}
