#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pfcred/report.hpp"

namespace py = pybind11;
using namespace pfcred;

namespace {

Dataset to_dataset(const Matrix& x, const py::object& y, bool categorical) {
  if (categorical || (py::isinstance<py::list>(y) && py::len(y) > 0 && py::isinstance<py::str>(y[py::int_(0)]))) {
    std::vector<std::string> labels;
    for (const auto& item : y) labels.push_back(py::str(item));
    return make_dataset(x, Response::categorical(std::move(labels)));
  }
  return make_dataset(x, Response::continuous(y.cast<Vector>()));
}

DesignMatrices make_design(const Matrix& x, const py::object& y, const std::string& basis, bool categorical) {
  return build_design(to_dataset(x, y, categorical), BasisSpec::parse(basis));
}

py::object as_python(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Principal fitted components: sufficient dimension reduction by inverse regression";

  static py::exception<Error> error(m, "PfcredError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<Subspace>(m, "Subspace")
      .def_property_readonly("basis", &Subspace::basis)
      .def_property_readonly("dim", &Subspace::dim)
      .def_property_readonly("ambient", &Subspace::ambient);

  py::class_<DesignMatrices>(m, "Design")
      .def_readonly("n", &DesignMatrices::n)
      .def_readonly("p", &DesignMatrices::p)
      .def_readonly("r", &DesignMatrices::r)
      .def_readonly("sigma", &DesignMatrices::Sigma)
      .def_readonly("sigma_fit", &DesignMatrices::SigmaFit)
      .def_readonly("sigma_res", &DesignMatrices::SigmaRes)
      .def_readonly("b_hat", &DesignMatrices::Bhat)
      .def_readonly("x_mean", &DesignMatrices::x_mean);

  py::class_<PfcFit>(m, "PfcFit")
      .def_property_readonly("model", [](const PfcFit& f) { return std::string(to_string(f.model_kind)); })
      .def_readonly("d", &PfcFit::d)
      .def_readonly("mu_hat", &PfcFit::mu_hat)
      .def_readonly("delta_hat", &PfcFit::delta_hat)
      .def_readonly("beta_hat", &PfcFit::beta_hat)
      .def_readonly("lambda_hat", &PfcFit::lambda_hat)
      .def_readonly("loglik", &PfcFit::loglik)
      .def_readonly("reduction", &PfcFit::reduction)
      .def_readonly("gamma_span", &PfcFit::gamma_span)
      .def_readonly("projection", &PfcFit::projection)
      .def_readonly("warnings", &PfcFit::warnings)
      .def("to_dict", [](const PfcFit& f) { return as_python(to_json(f)); });

  py::class_<StructuredFit>(m, "StructuredFit")
      .def_readonly("d", &StructuredFit::d)
      .def_readonly("delta_coeffs", &StructuredFit::delta_coeffs)
      .def_readonly("delta_tilde", &StructuredFit::delta_tilde)
      .def_readonly("loglik", &StructuredFit::loglik)
      .def_readonly("subspace", &StructuredFit::subspace)
      .def_readonly("iterations", &StructuredFit::iterations)
      .def_readonly("converged", &StructuredFit::converged)
      .def_readonly("gradient_norm", &StructuredFit::gradient_norm)
      .def_readonly("warnings", &StructuredFit::warnings)
      .def("to_dict", [](const StructuredFit& f) { return as_python(to_json(f)); });

  m.def("design", &make_design, py::arg("X"), py::arg("y"), py::arg("basis") = "poly:1",
        py::arg("categorical") = false, "Centered moment matrices for predictors X and response y.");

  m.def(
      "fit",
      [](const DesignMatrices& design, int d, const std::string& model) {
        if (model == "pfc") return fit_pfc(design, d);
        if (model == "pc") return fit_pc(design, d);
        if (model == "isotonic") return fit_isotonic_pfc(design, d);
        throw Error(ErrorKind::InvalidInput, "unknown model '" + model + "'");
      },
      py::arg("design"), py::arg("d"), py::arg("model") = "pfc");

  m.def("reduce", &reduce, py::arg("fit"), py::arg("X_new"));

  m.def(
      "select_d",
      [](const DesignMatrices& design, const std::string& method, double alpha) {
        if (method == "lrt") return as_python(to_json(select_d_lrt(design, alpha)));
        if (method == "aic") return as_python(to_json(select_d_ic(design, DimMethod::Aic)));
        if (method == "bic") return as_python(to_json(select_d_ic(design, DimMethod::Bic)));
        throw Error(ErrorKind::InvalidInput, "unknown method '" + method + "'");
      },
      py::arg("design"), py::arg("method") = "lrt", py::arg("alpha") = 0.05);

  m.def(
      "test_predictors",
      [](const DesignMatrices& design, const std::vector<int>& active, std::optional<int> d) {
        return as_python(to_json(d ? test_predictors(design, *d, active) : test_predictors_maxw(design, active)));
      },
      py::arg("design"), py::arg("active"), py::arg("d") = py::none());

  m.def(
      "fit_structured",
      [](const DesignMatrices& design, int d, const std::string& structure, double tol, int max_iter) {
        return fit_structured(design, d, DeltaStructure::parse(structure, design.p), {tol, max_iter});
      },
      py::arg("design"), py::arg("d"), py::arg("structure"), py::arg("tol") = 1e-9, py::arg("max_iter") = 500);

  m.def(
      "test_structure",
      [](const DesignMatrices& design, const std::string& structure, int w) {
        return as_python(to_json(test_structure(design, DeltaStructure::parse(structure, design.p), w)));
      },
      py::arg("design"), py::arg("structure"), py::arg("w") = -1);

  m.def(
      "principal_angles",
      [](const Matrix& a, const Matrix& b) {
        return principal_angles(Subspace::span_of(a), Subspace::span_of(b));
      },
      py::arg("A"), py::arg("B"), "Principal angles in radians between span(A) and span(B), ascending.");

  m.def("chi2_sf", &chi2_sf, py::arg("x"), py::arg("df"));

  m.def(
      "generate",
      [](const std::string& name, int n, int p, double sigma_y, std::uint64_t seed, std::uint64_t replication) {
        GeneratorParams g;
        g.name = parse_generator(name);
        g.n = n;
        g.p = p;
        g.sigma_y = sigma_y;
        g.seed = seed;
        const Sample s = Generator(g).draw(replication);
        return py::make_tuple(s.data.X, s.data.y.values(), s.truth.subspace.basis());
      },
      py::arg("name"), py::arg("n"), py::arg("p"), py::arg("sigma_y") = 1.0, py::arg("seed") = 0,
      py::arg("replication") = 0, "Simulated (X, y, basis of the true reduction).");
}
