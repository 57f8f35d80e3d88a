#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "fiberdiff/effdiff.hpp"
#include "fiberdiff/errors.hpp"
#include "fiberdiff/experiments.hpp"
#include "fiberdiff/solvers.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace fiberdiff;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::array_t<double> to_array(const std::vector<double>& v, int rows, int cols) {
  py::array_t<double> a({rows, cols});
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

std::vector<double> from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                               std::size_t expected) {
  if (static_cast<std::size_t>(a.size()) != expected)
    throw py::value_error("expected " + std::to_string(expected) + " values, got " + std::to_string(a.size()));
  return {a.data(), a.data() + a.size()};
}

// Accepts a float, a callable of u, or samples on the grid.
geometry::Field1D to_field(const geometry::Grid1D& g, const py::object& f) {
  if (py::isinstance<py::float_>(f) || py::isinstance<py::int_>(f)) return geometry::Field1D::constant(f.cast<double>());
  if (PyCallable_Check(f.ptr())) return geometry::Field1D::function(f.cast<std::function<double(double)>>());
  auto arr = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(f);
  if (!arr) throw py::type_error("curvature must be a float, a callable or a sequence of samples");
  return geometry::Field1D::sampled(g, from_array(arr, static_cast<std::size_t>(g.n)));
}

solvers::StepOptions step_options(const std::string& scheme, const std::string& average,
                                  const std::string& splitting) {
  solvers::StepOptions o;
  if (scheme == "be") o.scheme = solvers::TimeScheme::backward_euler;
  else if (scheme == "cn") o.scheme = solvers::TimeScheme::crank_nicolson;
  else if (scheme == "explicit") o.scheme = solvers::TimeScheme::explicit_euler;
  else throw py::value_error("scheme must be 'be', 'cn' or 'explicit'");
  if (average == "harmonic") o.average = solvers::FaceAverage::harmonic;
  else if (average == "arithmetic") o.average = solvers::FaceAverage::arithmetic;
  else throw py::value_error("average must be 'harmonic' or 'arithmetic'");
  if (splitting == "coupled") o.splitting = solvers::Splitting::coupled;
  else if (splitting == "alternating") o.splitting = solvers::Splitting::alternating;
  else throw py::value_error("splitting must be 'coupled' or 'alternating'");
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Effective diffusion on thin fiber bundles over curves and surfaces.";

  py::register_exception<InvariantViolation>(m, "InvariantViolation", PyExc_ValueError);
  py::register_exception<QuadratureError>(m, "QuadratureError", PyExc_RuntimeError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  // geometry
  py::class_<geometry::Grid1D>(m, "Grid1D")
      .def(py::init<double, int, bool>(), "length"_a, "n"_a, "periodic"_a)
      .def_readonly("length", &geometry::Grid1D::length)
      .def_readonly("n", &geometry::Grid1D::n)
      .def_readonly("periodic", &geometry::Grid1D::periodic)
      .def_property_readonly("spacing", &geometry::Grid1D::spacing)
      .def_property_readonly("points", [](const geometry::Grid1D& g) { return to_array(g.points()); })
      .def("__repr__", [](const geometry::Grid1D& g) {
        std::ostringstream os;
        os << "Grid1D(length=" << g.length << ", n=" << g.n << ", periodic=" << (g.periodic ? "True" : "False") << ")";
        return os.str();
      });

  py::class_<geometry::PlaneCurve>(m, "PlaneCurve")
      .def(py::init([](const geometry::Grid1D& g, const py::object& kappa) {
             return geometry::PlaneCurve(g, to_field(g, kappa));
           }),
           "grid"_a, "kappa"_a, "Curve given by its signed curvature: a float, a callable of u or grid samples.")
      .def_readonly("grid", &geometry::PlaneCurve::grid)
      .def("kappa", [](const geometry::PlaneCurve& c, double u) { return c.kappa(u); }, "u"_a);

  py::class_<geometry::SpaceCurve>(m, "SpaceCurve")
      .def(py::init([](const geometry::Grid1D& g, const py::object& kappa, const py::object& tau) {
             return geometry::SpaceCurve(g, to_field(g, kappa), to_field(g, tau));
           }),
           "grid"_a, "kappa"_a, "tau"_a = 0.0)
      .def_readonly("grid", &geometry::SpaceCurve::grid)
      .def("kappa", [](const geometry::SpaceCurve& c, double u) { return c.kappa(u); }, "u"_a)
      .def("tau", [](const geometry::SpaceCurve& c, double u) { return c.tau(u); }, "u"_a);

  py::class_<geometry::SurfaceSpec>(m, "SurfaceSpec")
      .def_readonly("axis1", &geometry::SurfaceSpec::axis1)
      .def_readonly("axis2", &geometry::SurfaceSpec::axis2)
      .def_readonly("axis_names", &geometry::SurfaceSpec::axis_names)
      .def_readonly("principal_aligned", &geometry::SurfaceSpec::principal_aligned)
      .def("kappa", [](const geometry::SurfaceSpec& s, double u1, double u2) {
        return std::pair{s.kappa1(u1, u2), s.kappa2(u1, u2)};
      }, "u1"_a, "u2"_a, "Principal curvatures at a parameter point.");

  m.def("make_circle", &geometry::make_circle, "R"_a, "samples"_a = 256);
  m.def("make_segment", &geometry::make_segment, "L"_a, "samples"_a = 256);
  m.def("make_torus", &geometry::make_torus, "r"_a, "R"_a, "n_theta"_a = 128, "n_phi"_a = 128, "normal_sign"_a = 1.0);
  m.def("make_sphere", &geometry::make_sphere, "r"_a, "n_theta"_a = 64, "n_phi"_a = 128, "normal_sign"_a = 1.0);
  m.def("make_lined_surface", &geometry::make_lined_surface, "curve"_a, "z_extent"_a, "n_z"_a = 64);
  m.def("principal_from_gauss_mean", &geometry::principal_from_gauss_mean, "K"_a, "H"_a, "tol"_a = 1e-12);
  m.def("curve_from_points",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pts, bool closed)
            -> std::variant<geometry::PlaneCurve, geometry::SpaceCurve> {
          if (pts.ndim() != 2 || (pts.shape(1) != 2 && pts.shape(1) != 3))
            throw py::value_error("points must have shape (n, 2) or (n, 3)");
          geometry::PointSet ps;
          ps.dim = static_cast<int>(pts.shape(1));
          for (py::ssize_t i = 0; i < pts.shape(0); ++i) {
            std::array<double, 3> p{};
            for (int k = 0; k < ps.dim; ++k) p[static_cast<std::size_t>(k)] = pts.at(i, k);
            ps.points.push_back(p);
          }
          return geometry::curvature_from_samples(ps, closed);
        },
        "points"_a, "closed"_a,
        "Curvature (and torsion in 3D) from sampled points, resampled to a uniform arc-length grid.");

  // effective diffusion
  py::class_<effdiff::BundleSpec>(m, "BundleSpec")
      .def_readonly("D0", &effdiff::BundleSpec::D0)
      .def_property_readonly("base_dim", &effdiff::BundleSpec::base_dim)
      .def("validate", &effdiff::BundleSpec::validate);
  m.def("channel_bundle", [](const geometry::PlaneCurve& c, double w, double D0) {
    return effdiff::BundleSpec{effdiff::PlanarChannel{c, w}, D0, {}};
  }, "curve"_a, "w"_a, "D0"_a = 1.0, "Planar channel of width w around a plane curve.");
  m.def("slab_bundle", [](const geometry::SurfaceSpec& s, double w, double D0) {
    return effdiff::BundleSpec{effdiff::SurfaceSlab{s, w}, D0, {}};
  }, "surface"_a, "w"_a, "D0"_a = 1.0, "Slab of thickness w around a surface.");
  m.def("tube_bundle", [](const geometry::SpaceCurve& c, double r, double D0) {
    return effdiff::BundleSpec{effdiff::TubeSurface{c, r}, D0, {}};
  }, "curve"_a, "r"_a, "D0"_a = 1.0, "Tube of radius r around a space curve.");

  py::class_<effdiff::LocalFiber>(m, "LocalFiber")
      .def_static("channel", &effdiff::LocalFiber::channel, "kappa"_a, "w"_a)
      .def_static("slab", &effdiff::LocalFiber::slab, "kappa1"_a, "kappa2"_a, "w"_a)
      .def_static("tube", &effdiff::LocalFiber::tube, "kappa"_a, "r"_a)
      .def("min_lift", &effdiff::LocalFiber::min_lift);
  m.def("fiber_sigma", [](const effdiff::LocalFiber& f) { return effdiff::fiber_sigma(f); }, "fiber"_a);
  m.def("fiber_effective_D", [](const effdiff::LocalFiber& f, double D0) { return effdiff::fiber_effective_D(f, D0); },
        "fiber"_a, "D0"_a = 1.0, "Eigenvalues of the effective diffusion by fiber quadrature.");

  m.def("channel_D_closed", &effdiff::channel_D_closed, "D0"_a, "w"_a, "kappa"_a);
  m.def("surface_D_closed", &effdiff::surface_D_closed, "D0"_a, "w"_a, "kappa1"_a, "kappa2"_a);
  m.def("surface_D1_as_printed", &effdiff::surface_D1_as_printed, "D0"_a, "w"_a, "kappa1"_a, "kappa2"_a);
  m.def("slab_sigma_closed", &effdiff::slab_sigma_closed, "w"_a, "kappa1"_a, "kappa2"_a);
  m.def("tube_D_closed", &effdiff::tube_D_closed, "D0"_a, "r"_a, "kappa"_a);
  m.def("tube_D_intermediate", &effdiff::tube_D_intermediate, "D0"_a, "r"_a, "kappa"_a);
  m.def("ogawa_truncation", &effdiff::ogawa_truncation, "D0"_a, "w"_a, "kappa"_a, "n_terms"_a);

  py::class_<effdiff::EffectiveField>(m, "EffectiveField")
      .def_readonly("base_dim", &effdiff::EffectiveField::base_dim)
      .def_readonly("axis1", &effdiff::EffectiveField::axis1)
      .def_readonly("axis2", &effdiff::EffectiveField::axis2)
      .def_readonly("axis_names", &effdiff::EffectiveField::axis_names)
      .def_readonly("principal_aligned", &effdiff::EffectiveField::principal_aligned)
      .def_readonly("D0", &effdiff::EffectiveField::D0)
      .def_property_readonly("shape", [](const effdiff::EffectiveField& f) -> py::tuple {
        if (f.base_dim == 1) return py::make_tuple(f.n1());
        return py::make_tuple(f.n1(), f.n2());
      })
      .def_property_readonly("sigma", [](const effdiff::EffectiveField& f) {
        return f.base_dim == 1 ? to_array(f.sigma) : to_array(f.sigma, f.n1(), f.n2());
      })
      .def_property_readonly("D1", [](const effdiff::EffectiveField& f) {
        return f.base_dim == 1 ? to_array(f.D1) : to_array(f.D1, f.n1(), f.n2());
      })
      .def_property_readonly("D2", [](const effdiff::EffectiveField& f) -> py::object {
        if (f.base_dim == 1) return py::none();
        return to_array(f.D2, f.n1(), f.n2());
      })
      .def_property_readonly("quadrature_discrepancy", [](const effdiff::EffectiveField& f) -> py::object {
        if (f.quadrature_discrepancy.empty()) return py::none();
        return f.base_dim == 1 ? to_array(f.quadrature_discrepancy)
                               : to_array(f.quadrature_discrepancy, f.n1(), f.n2());
      });

  m.def("effective_field", &effdiff::effective_field, "bundle"_a, "check_quadrature"_a = false,
        "sigma and the effective diffusion eigenvalues at every base grid point.");
  m.def("sigma_quadrature", [](const effdiff::BundleSpec& b, double u1, double u2) {
    return effdiff::sigma_quadrature(b, {u1, u2});
  }, "bundle"_a, "u1"_a, "u2"_a = 0.0);
  m.def("effective_D_quadrature", [](const effdiff::BundleSpec& b, double u1, double u2) {
    return effdiff::effective_D_quadrature(b, {u1, u2});
  }, "bundle"_a, "u1"_a, "u2"_a = 0.0);

  py::class_<effdiff::Reparameterization>(m, "Reparameterization")
      .def_property_readonly("new_length", &effdiff::Reparameterization::new_length)
      .def("to_new", &effdiff::Reparameterization::to_new, "u"_a)
      .def("to_old", &effdiff::Reparameterization::to_old, "u_new"_a)
      .def("rescaled_sigma", [](const effdiff::Reparameterization& r) { return to_array(r.rescaled_sigma()); })
      .def("samples", &effdiff::Reparameterization::samples);
  m.def("rescale_metric_1d", &effdiff::rescale_metric_1d, "curve"_a, "sigma"_a);

  // solvers
  py::class_<solvers::GridState1D>(m, "GridState1D")
      .def(py::init([](const geometry::Grid1D& g, const py::object& rho) {
             solvers::GridState1D s{g, {}, 0.0};
             if (PyCallable_Check(rho.ptr())) {
               const auto f = rho.cast<std::function<double(double)>>();
               for (int i = 0; i < g.n; ++i) s.rho.push_back(f(g.point(i)));
             } else {
               s.rho = from_array(rho.cast<py::array_t<double, py::array::c_style | py::array::forcecast>>(),
                                  static_cast<std::size_t>(g.n));
             }
             return s;
           }),
           "grid"_a, "rho"_a)
      .def_readonly("grid", &solvers::GridState1D::grid)
      .def_readwrite("t", &solvers::GridState1D::t)
      .def_property(
          "rho", [](const solvers::GridState1D& s) { return to_array(s.rho); },
          [](solvers::GridState1D& s, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
            s.rho = from_array(a, s.rho.size());
          });

  py::class_<solvers::GridState2D>(m, "GridState2D")
      .def(py::init([](const geometry::Grid1D& a1, const geometry::Grid1D& a2,
                       const py::array_t<double, py::array::c_style | py::array::forcecast>& rho) {
             return solvers::GridState2D{a1, a2, from_array(rho, static_cast<std::size_t>(a1.n) * a2.n), 0.0};
           }),
           "axis1"_a, "axis2"_a, "rho"_a, "rho has shape (axis1.n, axis2.n).")
      .def_readonly("axis1", &solvers::GridState2D::axis1)
      .def_readonly("axis2", &solvers::GridState2D::axis2)
      .def_readwrite("t", &solvers::GridState2D::t)
      .def_property(
          "rho", [](const solvers::GridState2D& s) { return to_array(s.rho, s.axis1.n, s.axis2.n); },
          [](solvers::GridState2D& s, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
            s.rho = from_array(a, s.rho.size());
          });

  py::class_<solvers::ChannelState2D>(m, "ChannelState2D")
      .def(py::init([](const geometry::Grid1D& u, int n_v, double w, const py::object& kappa,
                       const std::function<double(double, double)>& P0) {
             return solvers::make_channel_state(u, n_v, w, to_field(u, kappa), P0);
           }),
           "u"_a, "n_v"_a, "w"_a, "kappa"_a, "P0"_a)
      .def_readonly("u", &solvers::ChannelState2D::u)
      .def_readonly("n_v", &solvers::ChannelState2D::n_v)
      .def_readonly("w", &solvers::ChannelState2D::w)
      .def_readwrite("t", &solvers::ChannelState2D::t)
      .def_property_readonly("P", [](const solvers::ChannelState2D& s) { return to_array(s.P, s.u.n, s.n_v); });

  py::class_<solvers::FickJacobs1D>(m, "FickJacobs1D")
      .def(py::init([](const effdiff::EffectiveField& f, double dt, const std::string& scheme, const std::string& average) {
             return solvers::FickJacobs1D(f, dt, step_options(scheme, average, "coupled"));
           }),
           "field"_a, "dt"_a, "scheme"_a = "cn", "average"_a = "harmonic")
      .def("step", [](const solvers::FickJacobs1D& s, solvers::GridState1D& x, int n) {
        for (int k = 0; k < n; ++k) s.step(x);
      }, "state"_a, "n"_a = 1)
      .def("mass", &solvers::FickJacobs1D::mass)
      .def("flux_norm", &solvers::FickJacobs1D::flux_norm);

  py::class_<solvers::EffectiveDiffusion2D>(m, "EffectiveDiffusion2D")
      .def(py::init([](const effdiff::EffectiveField& f, double dt, const std::string& scheme, const std::string& average,
                       const std::string& splitting) {
             return solvers::EffectiveDiffusion2D(f, dt, step_options(scheme, average, splitting));
           }),
           "field"_a, "dt"_a, "scheme"_a = "cn", "average"_a = "harmonic", "splitting"_a = "coupled")
      .def("step", [](const solvers::EffectiveDiffusion2D& s, solvers::GridState2D& x, int n) {
        for (int k = 0; k < n; ++k) s.step(x);
      }, "state"_a, "n"_a = 1)
      .def("mass", &solvers::EffectiveDiffusion2D::mass)
      .def("flux_norm", &solvers::EffectiveDiffusion2D::flux_norm);

  py::class_<solvers::ChannelOracle>(m, "ChannelOracle")
      .def(py::init([](const solvers::ChannelState2D& layout, double D0, double dt, const std::string& scheme) {
             return solvers::ChannelOracle(layout, D0, dt, step_options(scheme, "harmonic", "coupled"));
           }),
           "layout"_a, "D0"_a, "dt"_a, "scheme"_a = "cn")
      .def("step", [](const solvers::ChannelOracle& s, solvers::ChannelState2D& x, int n) {
        for (int k = 0; k < n; ++k) s.step(x);
      }, "state"_a, "n"_a = 1)
      .def("mass", &solvers::ChannelOracle::mass)
      .def("flux_norm", &solvers::ChannelOracle::flux_norm);

  m.def("project_channel", &solvers::project_channel, "state"_a, "rho(u) = fiber integral of P against sqrt(g).");

  // experiments
  m.def("annulus_decay_experiment",
        [](double R, double w, double D0, int n_u, int n_v, double dt, double t_fit_start, double t_end) {
          experiments::AnnulusConfig c{R, w, D0, n_u, n_v, dt, t_fit_start, t_end};
          const auto r = experiments::annulus_decay_experiment(c);
          py::list runs;
          for (const auto& x : r.runs)
            runs.append(py::dict("n_u"_a = x.n_u, "n_v"_a = x.n_v, "dt"_a = x.dt, "rate"_a = x.rate,
                                 "mass_drift"_a = x.mass_drift));
          return py::dict("predicted"_a = r.predicted, "extrapolated"_a = r.extrapolated, "rel_error"_a = r.rel_error,
                          "runs"_a = runs, "seconds"_a = r.seconds);
        },
        "R"_a = 1.0, "w"_a = 0.1, "D0"_a = 1.0, "n_u"_a = 64, "n_v"_a = 8, "dt"_a = 2e-3, "t_fit_start"_a = 0.05,
        "t_end"_a = 1.0);
  m.def("closed_vs_quadrature_sweep", [](int draws, std::uint64_t seed, double margin) {
    const auto s = experiments::closed_vs_quadrature_sweep(draws, seed, margin);
    return py::dict("draws"_a = s.draws, "channel"_a = s.channel, "slab_D1"_a = s.slab_D1, "slab_D2"_a = s.slab_D2,
                    "slab_sigma"_a = s.slab_sigma, "tube"_a = s.tube, "seconds"_a = s.seconds);
  }, "draws"_a = 1000, "seed"_a = 2024, "margin"_a = 0.9);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, "args"_a, "Runs a CLI command in-process; returns (exit_code, stdout, stderr).");
}
