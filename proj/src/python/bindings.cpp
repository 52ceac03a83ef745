#include "ipvs/bench.hpp"
#include "ipvs/cli.hpp"
#include "ipvs/errors.hpp"
#include "ipvs/geometry.hpp"
#include "ipvs/search.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

namespace py = pybind11;
using namespace ipvs;

namespace {

Eigen::MatrixX2d offsets_matrix(const SearchPattern& p) {
  Eigen::MatrixX2d m(static_cast<Eigen::Index>(p.offsets.size()), 2);
  for (std::size_t i = 0; i < p.offsets.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = p.offsets[i];
  return m;
}

std::vector<Vec2> offsets_vector(const Eigen::MatrixX2d& m) {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).transpose());
  return out;
}

}  // namespace

PYBIND11_MODULE(_ipvs, m) {
  m.doc() = "In-plane visual servoing core";

  py::register_exception<Error>(m, "IpvsError", PyExc_RuntimeError);

  m.def("generate_pattern",
        [](double tolerance, double max_radius) {
          return offsets_matrix(generate_pattern(tolerance, max_radius));
        },
        py::arg("tolerance"), py::arg("max_radius"),
        "Search offsets (N x 2, mm) in visiting order.");

  m.def("covering_radius",
        [](const Eigen::MatrixX2d& offsets, double region_radius, double grid_step) {
          const std::vector<Vec2> v = offsets_vector(offsets);
          return covering_radius(v, region_radius, grid_step);
        },
        py::arg("offsets"), py::arg("region_radius"), py::arg("grid_step"));

  m.def("error_direction", &error_direction, py::arg("l"), py::arg("view"));

  m.def("reconstruct_error",
        [](const std::vector<Vec3>& dirs, const std::vector<double>& qs) {
          const Reconstruction r = reconstruct_error(dirs, qs);
          return py::make_tuple(r.error, r.rank, r.ill_conditioned);
        },
        py::arg("dirs"), py::arg("qs"), "Returns (error, rank, ill_conditioned).");

  m.def("quadratic_law",
        [](const std::vector<double>& levels, int seeds_per_level, double tolerance,
           std::uint64_t seed, int jobs) {
          const auto rows = spiral_law_rows(levels, seeds_per_level, tolerance, 1.5,
                                            WorldConfig{}, TimingModel{}, seed, jobs);
          const QuadraticFit fit = fit_quadratic_law(rows);
          py::dict d;
          d["slope"] = fit.slope;
          d["intercept"] = fit.intercept;
          d["r2"] = fit.r2;
          d["n"] = fit.n;
          return d;
        },
        py::arg("levels"), py::arg("seeds_per_level") = 200, py::arg("tolerance") = 0.05,
        py::arg("seed") = 0, py::arg("jobs") = 1);

  m.def("oracle_benchmark_json",
        [](std::uint64_t seed, double sigma, int insertions_per_style, int jobs) {
          BenchConfig cfg;
          cfg.seed = seed;
          cfg.insertions_per_style = insertions_per_style;
          DeployedModels models;
          for (ComponentStyle s : cfg.styles) models[s] = {RegressorModel::oracle(sigma)};
          py::gil_scoped_release release;
          return summary_json(run_benchmark(cfg, models, jobs), std::nullopt);
        },
        py::arg("seed") = 0, py::arg("sigma") = 0.002, py::arg("insertions_per_style") = 10,
        py::arg("jobs") = 1, "Benchmark summary (JSON text) with oracle perception.");

  m.def("run_cli",
        [](std::vector<std::string> args) {
          args.insert(args.begin(), "ipvs");
          py::gil_scoped_release release;
          return run_cli(args);
        },
        py::arg("args"), "Runs the command line tool in-process; returns the exit code.");
}
