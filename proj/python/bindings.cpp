#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "gempic/assembly.hpp"
#include "gempic/derham.hpp"
#include "gempic/driver.hpp"
#include "gempic/errors.hpp"
#include "gempic/linsolve.hpp"
#include "gempic/mapping.hpp"
#include "gempic/splines.hpp"

namespace py = pybind11;
using namespace gempic;

namespace {

py::tuple basis_values(const BasisValues& v) {
  py::list values;
  for (int k = 0; k < v.count; ++k) values.append(v.values[k]);
  return py::make_tuple(v.first, values);
}

py::dict row_dict(const DiagnosticsRow& r) {
  py::dict d;
  d["step"] = r.step;
  d["t"] = r.t;
  d["kinetic"] = r.kinetic;
  d["electric"] = r.electric;
  d["magnetic"] = r.magnetic;
  d["magnetic_component"] = r.magnetic_component;
  d["total"] = r.total;
  d["gauss"] = r.gauss;
  d["div_b"] = r.div_b;
  d["poynting"] = r.poynting;
  d["particles"] = r.particles;
  d["mass_iterations"] = r.mass_iterations;
  d["picard_iterations"] = r.picard_iterations;
  d["schur_iterations"] = r.schur_iterations;
  d["crossings"] = r.crossings;
  return d;
}

template <class E>
void string_enum(py::module_& m, const char* name, std::initializer_list<std::pair<const char*, E>> values) {
  py::enum_<E> e(m, name);
  for (const auto& [n, v] : values) e.value(n, v);
  e.def("__str__", [](E v) { return std::string(to_string(v)); });
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Structure-preserving particle-in-cell Vlasov-Maxwell solver on mapped grids";
  m.attr("__version__") = "0.1.0";

  auto error = py::register_exception<Error>(m, "GempicError", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", error);
  py::register_exception<DomainError>(m, "DomainError", error);
  py::register_exception<ShapeError>(m, "ShapeError", error);
  py::register_exception<SingularityError>(m, "SingularityError", error);
  py::register_exception<NumericalError>(m, "NumericalError", error);
  py::register_exception<StepTooLargeError>(m, "StepTooLargeError", error);
  py::register_exception<ConsistencyError>(m, "ConsistencyError", error);
  py::register_exception<ConfigError>(m, "ConfigError", error);

  py::enum_<BoundaryKind>(m, "BoundaryKind")
      .value("Clamped", BoundaryKind::Clamped)
      .value("Periodic", BoundaryKind::Periodic);
  string_enum<MapFamily>(m, "MapFamily",
                         {{"Cartesian", MapFamily::Cartesian},
                          {"Distorted", MapFamily::Distorted},
                          {"Cylindrical", MapFamily::Cylindrical},
                          {"Elliptical", MapFamily::Elliptical}});
  string_enum<Integrator>(m, "Integrator",
                          {{"HS", Integrator::HS}, {"CEF", Integrator::CEF}, {"DisGradE", Integrator::DisGradE}});
  string_enum<Composition>(m, "Composition",
                           {{"Lie", Composition::Lie}, {"Strang", Composition::Strang}});
  string_enum<ParticleBoundary>(m, "ParticleBoundary",
                                {{"Reflect", ParticleBoundary::Reflect},
                                 {"Periodic", ParticleBoundary::Periodic}});
  string_enum<Scenario>(m, "Scenario", {{"Kx", Scenario::Kx}, {"Ky", Scenario::Ky}, {"Kz", Scenario::Kz}});
  string_enum<FieldInit>(m, "FieldInit", {{"B1", FieldInit::B1}, {"B2", FieldInit::B2}, {"B3", FieldInit::B3}});
  string_enum<PreconditionerMode>(m, "PreconditionerMode",
                                  {{"None", PreconditionerMode::None},
                                   {"Jacobi", PreconditionerMode::Jacobi},
                                   {"Lumped", PreconditionerMode::Lumped}});

  py::class_<SplineBasis1D>(m, "SplineBasis1D")
      .def(py::init<int, int, BoundaryKind>(), py::arg("degree"), py::arg("cells"), py::arg("boundary"))
      .def_property_readonly("degree", &SplineBasis1D::degree)
      .def_property_readonly("cells", &SplineBasis1D::cells)
      .def_property_readonly("size", &SplineBasis1D::size)
      .def_property_readonly("knots",
                             [](const SplineBasis1D& b) {
                               return std::vector<double>(b.knots().begin(), b.knots().end());
                             })
      .def("eval", [](const SplineBasis1D& b, double xi) { return basis_values(b.eval(xi)); },
           py::arg("xi"), "(first index, nonzero values) of the degree p basis")
      .def("eval_lower", [](const SplineBasis1D& b, double xi) { return basis_values(b.eval_lower(xi)); },
           py::arg("xi"), "(first index, nonzero values) of the degree p-1 companion basis")
      .def("dense_values", &SplineBasis1D::dense_values, py::arg("xi"), py::arg("lower") = false)
      .def("derivative_matrix", [](const SplineBasis1D& b) { return b.derivative().dense(); });

  py::class_<MapParams>(m, "MapParams")
      .def(py::init<>())
      .def_readwrite("Lx", &MapParams::Lx)
      .def_readwrite("Ly", &MapParams::Ly)
      .def_readwrite("Lz", &MapParams::Lz)
      .def_readwrite("Lp", &MapParams::Lp)
      .def_readwrite("epsilon", &MapParams::epsilon)
      .def_readwrite("r0", &MapParams::r0)
      .def_readwrite("Lr", &MapParams::Lr);

  py::class_<Mapping>(m, "Mapping")
      .def(py::init<MapFamily, const MapParams&>(), py::arg("family"), py::arg("params"))
      .def_property_readonly("family", &Mapping::family)
      .def_property_readonly("volume", &Mapping::volume)
      .def("eval", &Mapping::eval, py::arg("xi"))
      .def("jacobian", &Mapping::jacobian, py::arg("xi"))
      .def("det", &Mapping::det, py::arg("xi"));

  py::class_<DeRhamSequence>(m, "DeRhamSequence")
      .def(py::init<int, Index3, bool>(), py::arg("degree"), py::arg("cells"), py::arg("pec"))
      .def_property_readonly("degree", &DeRhamSequence::degree)
      .def_property_readonly("cells", &DeRhamSequence::cells)
      .def_property_readonly("pec", &DeRhamSequence::pec)
      .def("dim", &DeRhamSequence::dim, py::arg("k"))
      .def("grad", &DeRhamSequence::grad)
      .def("curl", &DeRhamSequence::curl)
      .def("div", &DeRhamSequence::div)
      .def("grad_transpose", &DeRhamSequence::grad_transpose)
      .def("curl_transpose", &DeRhamSequence::curl_transpose)
      .def("div_transpose", &DeRhamSequence::div_transpose)
      .def("eval_form", &DeRhamSequence::eval_form, py::arg("k"), py::arg("coeffs"), py::arg("xi"),
           "Logical-space value of a k-form; scalars use component 0");

  py::class_<MassOperator>(m, "MassOperator")
      .def_readonly("form", &MassOperator::form)
      .def_readonly("quad_points", &MassOperator::quad_points)
      .def_property_readonly("size", &MassOperator::size)
      .def_property_readonly("nnz", [](const MassOperator& o) { return o.matrix.nnz(); })
      .def("matvec", [](const MassOperator& o, const Vector& x) {
        if (static_cast<std::size_t>(x.size()) != o.size()) {
          throw ShapeError("matvec: vector size does not match the operator");
        }
        return Vector(o * x);
      })
      .def("diagonal", [](const MassOperator& o) { return o.matrix.diagonal(); })
      .def("dense", [](const MassOperator& o) { return o.matrix.dense(); });

  m.def("assemble_mass", &assemble_mass, py::arg("seq"), py::arg("map"), py::arg("form"),
        py::arg("quad_points") = 0);
  m.def(
      "boundary_max_abs",
      [](const DeRhamSequence& seq, const Mapping& map) {
        const BoundaryMatrices b = assemble_boundary_matrices(seq, map);
        return py::make_tuple(b.zero_form.max_abs(), b.one_form.max_abs());
      },
      py::arg("seq"), py::arg("map"), "Largest entries of the 0-form and 1-form boundary matrices");

  py::class_<SolveReport>(m, "SolveReport")
      .def_readonly("iterations", &SolveReport::iterations)
      .def_readonly("residual", &SolveReport::residual)
      .def_readonly("converged", &SolveReport::converged);
  m.def(
      "mass_solve",
      [](const MassOperator& mass, const DeRhamSequence& seq, const Vector& b, PreconditionerMode mode,
         double tol, int maxit) {
        if (static_cast<std::size_t>(b.size()) != mass.size()) {
          throw ShapeError("mass_solve: right-hand side size does not match the operator");
        }
        const MassSolver solver(mass, seq, mode, tol, maxit);
        Vector x = Vector::Zero(b.size());
        const SolveReport r = solver.solve(b, x);
        return py::make_tuple(x, r);
      },
      py::arg("mass"), py::arg("seq"), py::arg("b"), py::arg("preconditioner") = PreconditionerMode::Lumped,
      py::arg("tol") = 1e-13, py::arg("maxit") = 5000);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("degree", &RunConfig::degree)
      .def_readwrite("cells", &RunConfig::cells)
      .def_readwrite("pec", &RunConfig::pec)
      .def_readwrite("family", &RunConfig::family)
      .def_readwrite("map_params", &RunConfig::map_params)
      .def_readwrite("scenario", &RunConfig::scenario)
      .def_readwrite("field_init", &RunConfig::field_init)
      .def_readwrite("beta", &RunConfig::beta)
      .def_readwrite("particles", &RunConfig::particles)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("boundary", &RunConfig::boundary)
      .def_readwrite("integrator", &RunConfig::integrator)
      .def_readwrite("composition", &RunConfig::composition)
      .def_readwrite("dt", &RunConfig::dt)
      .def_readwrite("t_end", &RunConfig::t_end)
      .def_readwrite("output_dir", &RunConfig::output_dir)
      .def_readwrite("workers", &RunConfig::workers)
      .def("steps", &RunConfig::steps)
      .def("set", [](RunConfig& c, const std::string& key, const std::string& value) {
        apply_setting(c, key, value);
      }, py::arg("key"), py::arg("value"), "Apply one 'key = value' setting")
      .def("validate", [](const RunConfig& c) { validate(c); })
      .def("__str__", [](const RunConfig& c) { return format_config(c); });

  m.def("preset_names", &preset_names);
  m.def("preset", [](const std::string& name) { return preset(name); }, py::arg("name"));
  m.def("preset_description", [](const std::string& name) { return preset_description(name); },
        py::arg("name"));
  m.def("parse_config", [](const std::string& text) { return parse_config(text); }, py::arg("text"));
  m.def("load_config", [](const std::string& path) { return load_config(path); }, py::arg("path"));
  m.def("config_keys", &config_keys);
  m.def("diagnostics_header", &diagnostics_header);

  m.def(
      "run",
      [](const RunConfig& cfg) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run(cfg);
        }
        py::list rows;
        for (const DiagnosticsRow& row : r.rows) rows.append(row_dict(row));
        py::dict out;
        out["rows"] = rows;
        out["error"] = r.error;
        out["numerical_failure"] = r.numerical_failure;
        return out;
      },
      py::arg("config"),
      "Run to t_end, writing diagnostics.csv into config.output_dir. Returns a dict with "
      "'rows', 'error' and 'numerical_failure'.");

  m.def("self_check", []() {
    py::list out;
    for (const CheckResult& c : self_check()) {
      out.append(py::make_tuple(c.name, c.passed, c.detail));
    }
    return out;
  });
}
