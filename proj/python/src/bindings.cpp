#include "spdstats/anova.hpp"
#include "spdstats/cluster.hpp"
#include "spdstats/error.hpp"
#include "spdstats/harmonize.hpp"
#include "spdstats/io.hpp"
#include "spdstats/parallel.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace spdstats;

namespace {

using Stack = py::array_t<double, py::array::c_style | py::array::forcecast>;

SpdMatrix to_spd(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("expected a square matrix");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > io::kSymmetryTolerance * scale) {
    throw ShapeError("matrix is not symmetric");
  }
  return validate_spd(a);
}

std::vector<SpdMatrix> to_spd_list(const Stack& stack) {
  if (stack.ndim() != 3 || stack.shape(1) != stack.shape(2)) {
    throw ShapeError("expected an array of shape (n, p, p)");
  }
  const auto n = stack.shape(0);
  const auto p = stack.shape(1);
  auto view = stack.unchecked<3>();
  std::vector<SpdMatrix> out;
  out.reserve(static_cast<std::size_t>(n));
  for (py::ssize_t k = 0; k < n; ++k) {
    Matrix a(p, p);
    for (py::ssize_t i = 0; i < p; ++i)
      for (py::ssize_t j = 0; j < p; ++j) a(i, j) = view(k, i, j);
    try {
      out.push_back(to_spd(a));
    } catch (const DomainError& e) {
      throw DomainError("matrix " + std::to_string(k) + ": " + e.what(), e.min_eigenvalue(),
                        static_cast<std::ptrdiff_t>(k));
    }
  }
  return out;
}

py::array_t<double> to_stack(const std::vector<SpdMatrix>& mats) {
  const auto n = static_cast<py::ssize_t>(mats.size());
  const auto p = mats.empty() ? 0 : static_cast<py::ssize_t>(mats.front().dim());
  py::array_t<double> out({n, p, p});
  auto view = out.mutable_unchecked<3>();
  for (py::ssize_t k = 0; k < n; ++k) {
    const Matrix a = mats[static_cast<std::size_t>(k)].dense();
    for (py::ssize_t i = 0; i < p; ++i)
      for (py::ssize_t j = 0; j < p; ++j) view(k, i, j) = a(i, j);
  }
  return out;
}

SymMatrix to_sym(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("expected a square matrix");
  return SymMatrix::from_dense(a);
}

SuperSample to_super_sample(const std::vector<Stack>& groups, const std::string& metric_name) {
  const auto& metric = metric_by_name(metric_name);
  std::vector<ConnectomeSample> samples;
  for (const auto& g : groups) samples.push_back(ConnectomeSample::from_connectomes(to_spd_list(g), metric));
  return SuperSample(std::move(samples), metric);
}

std::vector<py::array_t<double>> from_super_sample(const SuperSample& ss) {
  std::vector<py::array_t<double>> out;
  for (const auto& g : ss.groups()) out.push_back(to_stack(g.manifold_points()));
  return out;
}

}  // namespace

PYBIND11_MODULE(_spdstats, m) {
  m.doc() = "Statistics on the manifold of symmetric positive definite matrices";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
  py::register_exception<StateError>(m, "StateError", error.ptr());
  py::register_exception<UnsupportedMetric>(m, "UnsupportedMetric", PyExc_ValueError);
  py::register_exception<DegenerateGroupError>(m, "DegenerateGroupError", error.ptr());
  py::register_exception<SingularScatterError>(m, "SingularScatterError", error.ptr());

  m.def("metrics", [] {
    std::vector<std::string> names;
    for (auto n : kMetricNames) names.emplace_back(n);
    return names;
  });
  m.def("manifold_dim", [](std::size_t p) { return manifold_dim(p); }, py::arg("p"));
  m.def("set_num_threads", &parallel::set_num_threads, py::arg("n"),
        "Worker pool size; 0 uses every hardware thread.");
  m.def("get_num_threads", &parallel::num_threads);

  m.def("log", [](const std::string& metric, const Matrix& ref, const Matrix& point) {
    return metric_by_name(metric).log(to_spd(ref), to_spd(point)).dense();
  }, py::arg("metric"), py::arg("ref"), py::arg("point"));
  m.def("exp", [](const std::string& metric, const Matrix& ref, const Matrix& tangent) {
    return metric_by_name(metric).exp(to_spd(ref), to_sym(tangent)).dense();
  }, py::arg("metric"), py::arg("ref"), py::arg("tangent"));
  m.def("vec", [](const std::string& metric, const Matrix& ref, const Matrix& tangent) {
    return Vector(metric_by_name(metric).vec(to_spd(ref), to_sym(tangent)));
  }, py::arg("metric"), py::arg("ref"), py::arg("tangent"));
  m.def("unvec", [](const std::string& metric, const Matrix& ref, const Vector& coords) {
    return metric_by_name(metric).unvec(to_spd(ref), coords).dense();
  }, py::arg("metric"), py::arg("ref"), py::arg("coords"));
  m.def("distance", [](const std::string& metric, const Matrix& a, const Matrix& b) {
    return distance(metric_by_name(metric), to_spd(a), to_spd(b));
  }, py::arg("metric"), py::arg("a"), py::arg("b"));
  m.def("parallel_transport", [](const std::string& metric, const Matrix& from, const Matrix& to,
                                 const Matrix& v) {
    return parallel_transport(metric_by_name(metric), to_spd(from), to_spd(to), to_sym(v)).dense();
  }, py::arg("metric"), py::arg("source"), py::arg("target"), py::arg("tangent"));

  m.def("rspdnorm", [](std::size_t n, const Matrix& ref, const Matrix& dispersion,
                       const std::string& metric, std::uint64_t seed) {
    return to_stack(rspdnorm(n, to_spd(ref), dispersion, metric_by_name(metric), seed).manifold_points());
  }, py::arg("n"), py::arg("ref"), py::arg("dispersion"), py::arg("metric") = "airm",
     py::arg("seed") = 0);

  m.def("frechet_mean", [](const Stack& points, const std::string& metric, double lr, double tol,
                           std::size_t max_iter, std::optional<std::size_t> batch_size,
                           std::uint64_t seed, bool line_search, std::optional<Matrix> init) {
    const auto pts = to_spd_list(points);
    if (pts.empty()) throw ShapeError("frechet_mean needs at least one matrix");
    FrechetConfig cfg;
    cfg.learning_rate = lr;
    cfg.tolerance = tol;
    cfg.max_iterations = max_iter;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    cfg.line_search = line_search;
    const SpdMatrix start = init ? to_spd(*init) : SpdMatrix::identity(pts.front().dim());
    const auto r = [&] {
      py::gil_scoped_release release;
      return frechet_mean(pts, metric_by_name(metric), cfg, start);
    }();
    py::dict out;
    out["mean"] = r.mean.dense();
    out["epochs"] = r.epochs;
    out["final_delta"] = r.final_delta;
    out["converged"] = r.converged;
    return out;
  }, py::arg("points"), py::arg("metric") = "airm", py::arg("lr") = 0.2, py::arg("tol") = 0.05,
     py::arg("max_iter") = 20, py::arg("batch_size") = py::none(), py::arg("seed") = 0,
     py::arg("line_search") = false, py::arg("init") = py::none());

  m.def("frechet_anova", [](const std::vector<Stack>& groups, const std::string& metric,
                            std::size_t n_permutations, std::uint64_t seed) {
    auto ss = to_super_sample(groups, metric);
    const auto r = [&] {
      py::gil_scoped_release release;
      return frechet_anova(ss, n_permutations, seed);
    }();
    py::dict out;
    out["group_variations"] = r.group_variations;
    out["group_sigma2"] = r.group_sigma2;
    out["pooled_variation"] = r.pooled_variation;
    out["f_stat"] = r.f_stat;
    out["u_stat"] = r.u_stat;
    out["t_stat"] = r.t_stat;
    out["p_asymptotic"] = r.p_asymptotic ? py::object(py::float_(*r.p_asymptotic)) : py::object(py::none());
    out["p_permutation"] = r.p_permutation;
    out["n_permutations"] = r.n_permutations;
    return out;
  }, py::arg("groups"), py::arg("metric") = "airm", py::arg("n_permutations") = 100,
     py::arg("seed") = 0);

  m.def("riem_anova", [](const std::vector<Stack>& groups, const std::string& metric,
                         const std::string& stat, std::size_t n_iterations, std::uint64_t seed,
                         std::optional<std::size_t> pca_dim) {
    auto ss = to_super_sample(groups, metric);
    RiemAnovaOptions opt;
    if (stat == "log_wilks" || stat == "log-wilks") {
      opt.stat = ManovaStat::kLogWilks;
    } else if (stat == "pillai") {
      opt.stat = ManovaStat::kPillai;
    } else {
      throw std::invalid_argument("stat must be 'log_wilks' or 'pillai'");
    }
    opt.n_iterations = n_iterations;
    opt.seed = seed;
    opt.pca_dim = pca_dim;
    const auto r = [&] {
      py::gil_scoped_release release;
      return riem_anova(ss, opt);
    }();
    py::dict out;
    out["statistic"] = r.statistic;
    out["p_value"] = r.p_value;
    out["n_iterations"] = r.n_iterations;
    out["dim"] = r.dim;
    return out;
  }, py::arg("groups"), py::arg("metric") = "airm", py::arg("stat") = "log_wilks",
     py::arg("n_iterations") = 100, py::arg("seed") = 0, py::arg("pca_dim") = py::none());

  m.def("combat_harmonization", [](const std::vector<Stack>& sites, const std::string& metric) {
    auto ss = to_super_sample(sites, metric);
    return from_super_sample(combat_harmonization(ss).harmonized);
  }, py::arg("sites"), py::arg("metric") = "airm");
  m.def("rigid_harmonization", [](const std::vector<Stack>& sites, const std::string& metric) {
    auto ss = to_super_sample(sites, metric);
    return from_super_sample(rigid_harmonization(ss));
  }, py::arg("sites"), py::arg("metric") = "airm");

  m.def("silhouette_score", [](const Matrix& x, const std::vector<long>& labels) {
    return silhouette_score(x, labels);
  }, py::arg("x"), py::arg("labels"));
  m.def("calinski_harabasz_score", [](const Matrix& x, const std::vector<long>& labels) {
    return calinski_harabasz(x, labels);
  }, py::arg("x"), py::arg("labels"));
  m.def("davies_bouldin_score", [](const Matrix& x, const std::vector<long>& labels) {
    return davies_bouldin(x, labels);
  }, py::arg("x"), py::arg("labels"));
}
