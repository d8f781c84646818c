#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "wassdyn/dynamics.hpp"
#include "wassdyn/error.hpp"
#include "wassdyn/experiments.hpp"
#include "wassdyn/expr.hpp"
#include "wassdyn/invariant.hpp"
#include "wassdyn/measure.hpp"
#include "wassdyn/noise.hpp"
#include "wassdyn/transport.hpp"

namespace py = pybind11;
using namespace wassdyn;

namespace {

std::vector<Point> to_points(const std::vector<std::vector<double>>& xs) {
  std::vector<Point> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.emplace_back(x);
  return out;
}

DiscreteMeasure make_measure(const std::vector<std::vector<double>>& points, const std::vector<double>& weights) {
  if (points.size() != weights.size()) throw ValidationError("points and weights differ in length");
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < points.size(); ++i) atoms.push_back({Point(points[i]), weights[i]});
  return DiscreteMeasure::from_atoms(atoms);
}

std::vector<std::vector<double>> locations(const DiscreteMeasure& mu) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < mu.size(); ++i) out.emplace_back(mu.location(i).begin(), mu.location(i).end());
  return out;
}

}  // namespace

PYBIND11_MODULE(_wassdyn, m) {
  m.doc() = "Wasserstein dynamics core";
  m.attr("__version__") = kVersion;

  static py::exception<Error> base(m, "Error", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      base(e.what());
    }
  });

  py::class_<DiscreteMeasure>(m, "DiscreteMeasure")
      .def(py::init(&make_measure), py::arg("points"), py::arg("weights"))
      .def_static("dirac", [](const std::vector<double>& x) { return DiscreteMeasure::dirac(Point(x)); })
      .def_static("uniform", [](const std::vector<std::vector<double>>& xs) {
        const std::vector<Point> pts = to_points(xs);
        return DiscreteMeasure::uniform(pts);
      })
      .def_static("parse", &parse_measure_text)
      .def_static("load", &load_measure)
      .def("save", [](const DiscreteMeasure& mu, const std::string& path) { save_measure(path, mu); })
      .def_property_readonly("dim", &DiscreteMeasure::dim)
      .def_property_readonly("points", &locations)
      .def_property_readonly("weights",
                             [](const DiscreteMeasure& mu) { return std::vector<double>(mu.weights().begin(), mu.weights().end()); })
      .def("moment", [](const DiscreteMeasure& mu, const std::vector<double>& x0, double p) { return moment_p(mu, Point(x0), p); })
      .def("__len__", &DiscreteMeasure::size)
      .def("__repr__", [](const DiscreteMeasure& mu) {
        return "<DiscreteMeasure dim=" + std::to_string(mu.dim()) + " atoms=" + std::to_string(mu.size()) + ">";
      });

  py::class_<MapSpec>(m, "MapSpec")
      .def_property_readonly("dim", &MapSpec::dim)
      .def("describe", &MapSpec::describe)
      .def("__call__", [](const MapSpec& f, const std::vector<double>& x) { return eval_map(f, x); })
      .def("__repr__", [](const MapSpec& f) { return "<MapSpec " + f.describe() + ">"; });

  py::class_<KernelSpec>(m, "KernelSpec")
      .def_property_readonly("dim", &KernelSpec::dim)
      .def("describe", &KernelSpec::describe)
      .def("__repr__", [](const KernelSpec& k) { return "<KernelSpec " + k.describe() + ">"; });

  m.def("parse_map", &parse_map);
  m.def("parse_kernel", &parse_kernel);
  m.def("eval_map", [](const MapSpec& f, const std::vector<double>& x) { return eval_map(f, x); });
  m.def("push_forward", &push_forward);
  m.def("eval_expression", [](const std::string& src, const std::vector<double>& x) {
    return eval_ast(parse_expression(src, x.size()), x);
  });

  m.def("wasserstein", &wasserstein, py::arg("mu"), py::arg("nu"), py::arg("p") = 1.0);
  m.def("wasserstein_1d", &wasserstein_1d, py::arg("mu"), py::arg("nu"), py::arg("p") = 1.0);
  m.def(
      "wasserstein_exact",
      [](const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
        const ExactResult r = wasserstein_exact(mu, nu, p);
        std::vector<std::vector<double>> plan(r.plan.rows, std::vector<double>(r.plan.cols));
        for (std::size_t i = 0; i < r.plan.rows; ++i) {
          for (std::size_t j = 0; j < r.plan.cols; ++j) plan[i][j] = r.plan.at(i, j);
        }
        return py::make_tuple(r.distance, plan);
      },
      py::arg("mu"), py::arg("nu"), py::arg("p") = 1.0, "Returns (distance, plan as nested lists).");
  m.def("kr_dual", [](const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const DualResult r = kr_dual(mu, nu);
    return py::make_tuple(r.value, r.potentials.phi, r.potentials.psi);
  });

  m.def("mix", &mix, py::arg("first"), py::arg("second"), py::arg("t"));
  m.def(
      "compress",
      [](const DiscreteMeasure& mu, std::size_t max_support, double p) {
        CompressResult r = compress(mu, max_support, p);
        return py::make_tuple(std::move(r.measure), r.bound);
      },
      py::arg("mu"), py::arg("max_support"), py::arg("p") = 1.0);
  m.def("tail_mass", [](const DiscreteMeasure& mu, const std::vector<std::vector<double>>& anchors, double R) {
    const std::vector<Point> a = to_points(anchors);
    return tail_mass(mu, a, R);
  }, py::arg("mu"), py::arg("anchors"), py::arg("radius"));
  m.def("projection_distance", [](const DiscreteMeasure& mu, const std::vector<std::vector<double>>& anchors, double p) {
    const std::vector<Point> a = to_points(anchors);
    return projection_distance(mu, a, p);
  }, py::arg("mu"), py::arg("anchors"), py::arg("p") = 1.0);

  m.def(
      "apply_kernel",
      [](const KernelSpec& k, const DiscreteMeasure& mu, double p, std::size_t cap) {
        return apply_kernel(MWOperator{k, cap, p}, mu);
      },
      py::arg("kernel"), py::arg("mu"), py::arg("p") = 1.0, py::arg("compression_cap") = 256);
  m.def(
      "noise_level",
      [](const KernelSpec& k, const MapSpec& f, const std::vector<std::vector<double>>& samples, double p) {
        const std::vector<Point> pts = to_points(samples);
        const NoiseLevel n = noise_level(MWOperator{k, 0, p}, f, pts);
        return py::make_tuple(n.estimate, n.analytic_bound);
      },
      py::arg("kernel"), py::arg("map"), py::arg("samples"), py::arg("p") = 1.0);
  m.def("gaussian_noise_level", &gaussian_noise_level, py::arg("sigma"), py::arg("p") = 1.0, py::arg("dim") = 1);
  m.def(
      "find_stationary",
      [](const KernelSpec& k, const DiscreteMeasure& mu0, double p, double tol, std::size_t max_iter, std::size_t cap) {
        const StationaryResult r = find_stationary(MWOperator{k, cap, p}, mu0, tol, max_iter);
        py::dict out;
        out["measure"] = r.measure;
        out["residual"] = r.residual;
        out["residual_p"] = r.residual_p;
        out["iterations"] = r.iterations;
        out["converged"] = r.converged;
        out["compression_cost_total"] = r.compression_cost_total;
        return out;
      },
      py::arg("kernel"), py::arg("mu0"), py::arg("p") = 1.0, py::arg("tol") = 1e-3, py::arg("max_iter") = 1000,
      py::arg("compression_cap") = 256);
  m.def("growth_ratio_profile", [](const MapSpec& f, const std::vector<double>& x0, const std::vector<double>& radii) {
    const GrowthProfile g = growth_ratio_profile(f, Point(x0), radii);
    std::vector<std::pair<double, double>> rows;
    for (const GrowthRow& r : g.rows) rows.emplace_back(r.radius, r.max_ratio);
    return py::make_tuple(rows, g.unbounded_suspect);
  }, py::arg("map"), py::arg("center"), py::arg("radii"));
  m.def("run_experiment_json", [](const std::string& config, const std::string& base_dir) {
    const ExperimentConfig cfg = parse_config(nlohmann::json::parse(config), base_dir);
    return run_experiment(cfg).to_json().dump();
  });
}
