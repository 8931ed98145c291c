#include "spdstats/anova.hpp"
#include "spdstats/cluster.hpp"
#include "spdstats/error.hpp"
#include "spdstats/harmonize.hpp"
#include "spdstats/io.hpp"
#include "spdstats/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spdstats;

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3, kNotConverged = 4 };

struct CommonOptions {
  std::size_t threads = 0;
  std::uint64_t seed = 0;
  std::string metric = "airm";
  std::string report;
};

std::size_t default_threads() {
  if (const char* env = std::getenv("SPDSTATS_THREADS")) {
    try {
      return static_cast<std::size_t>(std::stoul(env));
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("SPDSTATS_THREADS='") + env + "' is not a count");
    }
  }
  return 0;
}

void add_threads(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores; default $SPDSTATS_THREADS)");
}

void add_seed(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
}

void add_metric(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--metric", c.metric,
                  "euclidean, airm, log-euclidean, log-cholesky or bures-wasserstein")
      ->capture_default_str();
}

void add_report(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--report", c.report, "Write the JSON report here instead of stdout");
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

void emit(const json& report, const std::string& path) {
  if (path.empty()) {
    std::cout << report.dump(2) << '\n';
    return;
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write report " + path);
  f << report.dump(2) << '\n';
}

json base_report(const std::string& command, const std::string& echo, const CommonOptions& c) {
  return {{"command", command},
          {"argv", echo},
          {"config", {{"metric", c.metric}, {"seed", c.seed}, {"threads", parallel::num_threads()}}}};
}

json frechet_config_json(const FrechetConfig& f) {
  return {{"learning_rate", f.learning_rate},
          {"tolerance", f.tolerance},
          {"max_iterations", f.max_iterations},
          {"batch_size", f.batch_size ? json(*f.batch_size) : json("full")},
          {"line_search", f.line_search}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string indexed_name(const std::string& stem, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return stem + "_" + buf + ".csv";
}

// Matrices of the manifest split by a label, in order of first appearance.
struct LabelledData {
  io::Manifest manifest;
  std::vector<SpdMatrix> matrices;
  io::Grouping grouping;
};

LabelledData load_labelled(const std::string& manifest_path, bool by_site) {
  LabelledData d;
  d.manifest = io::read_manifest(manifest_path);
  d.matrices = io::load_matrices(d.manifest);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < d.manifest.entries.size(); ++i) {
    const auto& e = d.manifest.entries[i];
    if (by_site) {
      if (!e.site) throw ShapeError("manifest entry " + std::to_string(i) + " has no site label");
      labels.push_back(*e.site);
    } else {
      labels.push_back(e.group);
    }
  }
  d.grouping = io::group_labels(labels);
  return d;
}

SuperSample build_super_sample(const LabelledData& d, const MetricDescriptor& metric) {
  std::vector<std::vector<SpdMatrix>> parts(d.grouping.names.size());
  for (std::size_t i = 0; i < d.matrices.size(); ++i) parts[d.grouping.index[i]].push_back(d.matrices[i]);
  std::vector<ConnectomeSample> groups;
  for (auto& part : parts) groups.push_back(ConnectomeSample::from_connectomes(std::move(part), metric));
  return SuperSample(std::move(groups), metric);
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  std::size_t n = 0;
  std::size_t p = 0;
  std::string ref = "identity";
  double ref_scale = 1.0;
  std::string dispersion = "identity";
  std::string out_dir;
  std::string group = "sample";
  std::optional<std::string> site;
  bool append = false;
};

int run_gen(const GenOptions& o, const CommonOptions& c, const std::string& echo) {
  if (o.n == 0 || o.p == 0) throw std::invalid_argument("--n and --p must be positive");
  if (!(o.ref_scale > 0.0)) throw std::invalid_argument("--ref-scale must be positive");
  const auto& metric = metric_by_name(c.metric);
  const auto pp = static_cast<Eigen::Index>(o.p);
  Matrix ref = o.ref == "identity" ? Matrix(Matrix::Identity(pp, pp)) : io::read_spd_csv(o.ref).dense();
  if (ref.rows() != pp) {
    throw ShapeError("--ref is " + std::to_string(ref.rows()) + "x" + std::to_string(ref.rows()) +
                     " but --p is " + std::to_string(o.p));
  }
  const auto ref_spd = validate_spd(Matrix(o.ref_scale * ref));
  const auto d = static_cast<Eigen::Index>(manifold_dim(o.p));
  const Matrix dispersion =
      o.dispersion == "identity" ? Matrix(Matrix::Identity(d, d)) : io::read_csv_matrix(o.dispersion);

  const auto sample = rspdnorm(o.n, ref_spd, dispersion, metric, c.seed);
  const auto points = sample.manifold_points();

  fs::create_directories(o.out_dir);
  const fs::path manifest_path = fs::path(o.out_dir) / "manifest.json";
  io::Manifest manifest;
  if (o.append && fs::exists(manifest_path)) manifest = io::read_manifest(manifest_path);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::string name = indexed_name(o.group, i);
    io::write_csv_matrix(fs::path(o.out_dir) / name, points[i].dense());
    std::erase_if(manifest.entries, [&](const io::ManifestEntry& e) { return e.path == name; });
    manifest.entries.push_back({name, o.group, o.site});
  }
  io::write_manifest(manifest_path, manifest);

  json report = base_report("gen", echo, c);
  report["config"]["n"] = o.n;
  report["config"]["p"] = o.p;
  report["config"]["ref"] = o.ref;
  report["config"]["ref_scale"] = o.ref_scale;
  report["config"]["dispersion"] = o.dispersion;
  report["config"]["group"] = o.group;
  report["config"]["site"] = o.site ? json(*o.site) : json(nullptr);
  report["results"] = {{"manifest", manifest_path.string()},
                       {"files_written", points.size()},
                       {"manifest_entries", manifest.entries.size()},
                       {"coord_dim", d}};
  emit(report, c.report);
  return kOk;
}

// ---------------------------------------------------------------- fmean

struct FmeanOptions {
  std::string manifest;
  double lr = 0.2;
  double tol = 0.05;
  std::size_t max_iter = 20;
  std::optional<std::size_t> batch_size;
  std::string out = "frechet_mean.csv";
};

int run_fmean(const FmeanOptions& o, const CommonOptions& c, const std::string& echo) {
  const auto& metric = metric_by_name(c.metric);
  const auto manifest = io::read_manifest(o.manifest);
  const auto matrices = io::load_matrices(manifest);
  FrechetConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.tolerance = o.tol;
  cfg.max_iterations = o.max_iter;
  cfg.batch_size = o.batch_size;
  cfg.seed = c.seed;

  const auto t0 = std::chrono::steady_clock::now();
  const auto result = frechet_mean(matrices, metric, cfg, SpdMatrix::identity(matrices.front().dim()));
  const double seconds = seconds_since(t0);
  io::write_csv_matrix(o.out, result.mean.dense());

  json report = base_report("fmean", echo, c);
  report["config"]["manifest"] = o.manifest;
  report["config"]["frechet"] = frechet_config_json(cfg);
  report["results"] = {{"mean_path", o.out},
                       {"n", matrices.size()},
                       {"p", matrices.front().dim()},
                       {"epochs", result.epochs},
                       {"final_delta", result.final_delta},
                       {"converged", result.converged},
                       {"wall_seconds", seconds}};
  emit(report, c.report);
  if (!result.converged) {
    std::cerr << "warning: Fréchet mean did not converge within " << cfg.max_iterations
              << " epochs (final relative step " << result.final_delta << ")\n";
    return kNotConverged;
  }
  return kOk;
}

// ---------------------------------------------------------------- anova

struct AnovaOptions {
  std::string manifest;
  std::string test = "riem";
  std::string stat = "log-wilks";
  std::size_t iterations = 100;
  std::optional<std::size_t> pca_dim;
};

int run_anova(const AnovaOptions& o, const CommonOptions& c, const std::string& echo) {
  const auto& metric = metric_by_name(c.metric);
  const auto data = load_labelled(o.manifest, false);
  auto ss = build_super_sample(data, metric);
  if (ss.num_groups() < 2) throw ShapeError("the manifest defines only one group");

  json report = base_report("anova", echo, c);
  report["config"]["manifest"] = o.manifest;
  report["config"]["test"] = o.test;
  report["config"]["iterations"] = o.iterations;
  report["config"]["frechet"] = frechet_config_json(FrechetConfig::precise());
  json groups = json::array();
  for (std::size_t j = 0; j < ss.num_groups(); ++j) {
    groups.push_back({{"name", data.grouping.names[j]}, {"size", ss.group(j).size()}});
  }

  const auto t0 = std::chrono::steady_clock::now();
  if (o.test == "frechet") {
    const auto r = frechet_anova(ss, o.iterations, c.seed);
    for (std::size_t j = 0; j < ss.num_groups(); ++j) {
      groups[j]["variation"] = r.group_variations[j];
      groups[j]["sigma2"] = r.group_sigma2[j];
    }
    report["results"] = {{"groups", groups},
                         {"pooled_variation", r.pooled_variation},
                         {"F_n", r.f_stat},
                         {"U_n", r.u_stat},
                         {"T_n", r.t_stat},
                         {"p_asymptotic", r.p_asymptotic ? json(*r.p_asymptotic) : json(nullptr)},
                         {"p_permutation", r.p_permutation},
                         {"p_value", r.p_permutation},
                         {"n_permutations", r.n_permutations}};
  } else if (o.test == "riem") {
    RiemAnovaOptions opt;
    if (o.stat == "log-wilks" || o.stat == "log_wilks") {
      opt.stat = ManovaStat::kLogWilks;
    } else if (o.stat == "pillai") {
      opt.stat = ManovaStat::kPillai;
    } else {
      throw std::invalid_argument("--stat must be log-wilks or pillai");
    }
    opt.n_iterations = o.iterations;
    opt.seed = c.seed;
    opt.pca_dim = o.pca_dim;
    report["config"]["stat"] = o.stat;
    report["config"]["pca_dim"] = o.pca_dim ? json(*o.pca_dim) : json(nullptr);
    const auto r = riem_anova(ss, opt);
    report["results"] = {{"groups", groups},
                         {"stat", o.stat},
                         {"statistic", r.statistic},
                         {"p_value", r.p_value},
                         {"n_iterations", r.n_iterations},
                         {"dim", r.dim}};
  } else {
    throw std::invalid_argument("--test must be frechet or riem");
  }
  report["results"]["wall_seconds"] = seconds_since(t0);
  emit(report, c.report);
  return kOk;
}

// ---------------------------------------------------------------- harmonize

struct HarmonizeOptions {
  std::string manifest;
  std::string method = "combat";
  std::string out_dir;
};

json site_quality(SuperSample& ss) {
  ss.compute_grand_mean();
  ss.compute_scatters();
  std::vector<long> labels;
  for (auto l : ss.labels()) labels.push_back(static_cast<long>(l));
  const Matrix& v = ss.stacked_vectors();
  const double ch = calinski_harabasz(v, labels);
  return {{"silhouette", silhouette_score(v, labels)},
          {"calinski_harabasz", std::isfinite(ch) ? json(ch) : json("inf")},
          {"davies_bouldin", davies_bouldin(v, labels)}};
}

double max_site_mean_gap(const SuperSample& ss) {
  const SpdMatrix mu = *ss.grand_mean();
  double worst = 0.0;
  for (const auto& g : ss.groups()) {
    const auto m = frechet_mean(g.manifold_points(), ss.metric(), FrechetConfig::precise(), mu).mean;
    worst = std::max(worst, (m.dense() - mu.dense()).norm() / mu.dense().norm());
  }
  return worst;
}

int run_harmonize(const HarmonizeOptions& o, const CommonOptions& c, const std::string& echo) {
  const auto& metric = metric_by_name(c.metric);
  const auto data = load_labelled(o.manifest, true);
  auto ss = build_super_sample(data, metric);
  const auto t0 = std::chrono::steady_clock::now();

  std::optional<SuperSample> out;
  json model;
  if (o.method == "combat") {
    auto r = combat_harmonization(ss);
    model = {{"shrinkage_iterations", r.model.iterations},
             {"constant_features", r.model.constant_features}};
    out.emplace(std::move(r.harmonized));
  } else if (o.method == "rigid") {
    out.emplace(rigid_harmonization(ss));
  } else {
    throw std::invalid_argument("--method must be combat or rigid");
  }
  const double seconds = seconds_since(t0);

  fs::create_directories(o.out_dir);
  std::vector<std::size_t> cursor(out->num_groups(), 0);
  io::Manifest written;
  for (std::size_t i = 0; i < data.matrices.size(); ++i) {
    const std::size_t site = data.grouping.index[i];
    const auto& conns = out->group(site).connectomes();
    const std::string name = indexed_name("harmonized", i);
    io::write_csv_matrix(fs::path(o.out_dir) / name, conns[cursor[site]++].dense());
    const auto& e = data.manifest.entries[i];
    written.entries.push_back({name, e.group, e.site});
  }
  const fs::path manifest_path = fs::path(o.out_dir) / "manifest.json";
  io::write_manifest(manifest_path, written);

  json report = base_report("harmonize", echo, c);
  report["config"]["manifest"] = o.manifest;
  report["config"]["method"] = o.method;
  report["config"]["frechet"] = frechet_config_json(FrechetConfig::precise());
  json sites = json::array();
  for (std::size_t j = 0; j < ss.num_groups(); ++j) {
    sites.push_back({{"name", data.grouping.names[j]}, {"size", ss.group(j).size()}});
  }
  json before = site_quality(ss);
  before["site_mean_max_rel_gap"] = max_site_mean_gap(ss);
  json after = site_quality(*out);
  after["site_mean_max_rel_gap"] = max_site_mean_gap(*out);
  report["results"] = {{"sites", sites},
                       {"manifest", manifest_path.string()},
                       {"before", before},
                       {"after", after},
                       {"wall_seconds", seconds}};
  if (!model.is_null()) report["results"]["model"] = model;
  emit(report, c.report);
  return kOk;
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
  std::vector<std::size_t> n_list = {100, 200, 300, 400};
  std::vector<std::size_t> p_list = {20, 30, 40};
  std::vector<std::size_t> threads_list = {1};
  std::vector<std::string> batch_list = {"full"};
  std::size_t repeats = 1;
  std::string out = "bench.csv";
  std::string summary;
  double lr = 0.2;
  double tol = 0.05;
  std::size_t max_iter = 20;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

int run_bench(const BenchOptions& o, const CommonOptions& c, const std::string& echo) {
  const auto& metric = metric_by_name(c.metric);
  if (o.repeats < 1) throw std::invalid_argument("--repeats must be at least 1");
  std::vector<std::optional<std::size_t>> batches;
  for (const auto& b : o.batch_list) {
    if (b == "full") {
      batches.push_back(std::nullopt);
    } else {
      try {
        batches.push_back(static_cast<std::size_t>(std::stoul(b)));
      } catch (const std::exception&) {
        throw std::invalid_argument("--batch-list entries must be integers or 'full', got '" + b + "'");
      }
    }
  }

  std::ofstream csv(o.out, std::ios::trunc);
  if (!csv) throw IoError("cannot write " + o.out);
  csv << "n,p,threads,batch_size,repeat,seconds\n";
  const std::string summary_path =
      !o.summary.empty() ? o.summary
                         : (fs::path(o.out).replace_extension("").string() + "_summary.csv");
  std::ofstream summary;
  if (o.repeats >= 3) {
    summary.open(summary_path, std::ios::trunc);
    if (!summary) throw IoError("cannot write " + summary_path);
    summary << "n,p,threads,batch_size,repeats,min,median,max\n";
  }

  json cells = json::array();
  char line[160];
  for (std::size_t p : o.p_list) {
    const auto d = static_cast<Eigen::Index>(manifold_dim(p));
    for (std::size_t n : o.n_list) {
      // identical data for every thread count and batch size of a cell
      const auto points =
          rspdnorm(n, SpdMatrix::identity(p), Matrix::Identity(d, d), metric, c.seed).manifold_points();
      for (std::size_t threads : o.threads_list) {
        parallel::ScopedThreads scoped(threads);
        for (const auto& batch : batches) {
          FrechetConfig cfg;
          cfg.learning_rate = o.lr;
          cfg.tolerance = o.tol;
          cfg.max_iterations = o.max_iter;
          cfg.batch_size = batch ? std::optional<std::size_t>(std::min(*batch, n)) : std::nullopt;
          cfg.seed = c.seed;
          const std::size_t batch_size = cfg.batch_size.value_or(n);
          std::vector<double> times;
          for (std::size_t r = 0; r < o.repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto result = frechet_mean(points, metric, cfg, SpdMatrix::identity(p));
            const double s = seconds_since(t0);
            (void)result;
            times.push_back(s);
            std::snprintf(line, sizeof line, "%zu,%zu,%zu,%zu,%zu,%.9g\n", n, p,
                          parallel::num_threads(), batch_size, r, s);
            csv << line << std::flush;
          }
          if (o.repeats >= 3) {
            std::snprintf(line, sizeof line, "%zu,%zu,%zu,%zu,%zu,%.9g,%.9g,%.9g\n", n, p,
                          parallel::num_threads(), batch_size, o.repeats,
                          *std::min_element(times.begin(), times.end()), median(times),
                          *std::max_element(times.begin(), times.end()));
            summary << line;
          }
          cells.push_back({{"n", n},
                           {"p", p},
                           {"threads", parallel::num_threads()},
                           {"batch_size", batch_size},
                           {"median_seconds", median(times)}});
        }
      }
    }
  }

  json report = base_report("bench", echo, c);
  report["config"]["n_list"] = o.n_list;
  report["config"]["p_list"] = o.p_list;
  report["config"]["threads_list"] = o.threads_list;
  report["config"]["batch_list"] = o.batch_list;
  report["config"]["repeats"] = o.repeats;
  FrechetConfig echo_cfg;
  echo_cfg.learning_rate = o.lr;
  echo_cfg.tolerance = o.tol;
  echo_cfg.max_iterations = o.max_iter;
  report["config"]["frechet"] = frechet_config_json(echo_cfg);
  report["results"] = {{"csv", o.out},
                       {"summary_csv", o.repeats >= 3 ? json(summary_path) : json(nullptr)},
                       {"cells", cells}};
  emit(report, c.report);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string echo = command_line(argc, argv);
  CLI::App app{"Statistics on the manifold of symmetric positive definite matrices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "spdstats 0.1.0");

  CommonOptions common;
  GenOptions gen;
  FmeanOptions fmean;
  AnovaOptions anova;
  HarmonizeOptions harm;
  BenchOptions bench;

  auto* g = app.add_subcommand("gen", "Sample SPD matrices from a Riemannian normal distribution");
  g->add_option("--n", gen.n, "Number of matrices")->required();
  g->add_option("--p", gen.p, "Matrix size")->required();
  g->add_option("--ref", gen.ref, "Centre: 'identity' or a CSV matrix file")->capture_default_str();
  g->add_option("--ref-scale", gen.ref_scale, "Multiply the centre by this factor")->capture_default_str();
  g->add_option("--dispersion", gen.dispersion,
                "d x d covariance of the tangent coordinates (d = p(p+1)/2): 'identity' or a CSV file")
      ->capture_default_str();
  g->add_option("--out-dir", gen.out_dir, "Directory for the matrices and manifest.json")->required();
  g->add_option("--group", gen.group, "Group label, also the file name prefix")->capture_default_str();
  g->add_option("--site", gen.site, "Site label recorded in the manifest");
  g->add_flag("--append", gen.append, "Add to an existing manifest.json instead of replacing it");
  add_metric(g, common);
  add_seed(g, common);
  add_report(g, common);

  auto* f = app.add_subcommand("fmean", "Fréchet mean by mini-batch gradient descent");
  f->add_option("manifest", fmean.manifest, "manifest.json")->required();
  f->add_option("--lr", fmean.lr, "Learning rate")->capture_default_str();
  f->add_option("--tol", fmean.tol, "Relative change per epoch that stops the iteration")->capture_default_str();
  f->add_option("--max-iter", fmean.max_iter, "Maximum epochs")->capture_default_str();
  f->add_option("--batch-size", fmean.batch_size, "Mini-batch size (default: all matrices)");
  f->add_option("--out", fmean.out, "CSV file for the mean")->capture_default_str();
  add_metric(f, common);
  add_threads(f, common);
  add_seed(f, common);
  add_report(f, common);

  auto* a = app.add_subcommand("anova", "Fréchet ANOVA or permutation MANOVA across manifest groups");
  a->add_option("manifest", anova.manifest, "manifest.json with group labels")->required();
  a->add_option("--test", anova.test, "frechet or riem")->capture_default_str();
  a->add_option("--stat", anova.stat, "log-wilks or pillai (riem test)")->capture_default_str();
  a->add_option("--iterations", anova.iterations, "Number of permutations")->capture_default_str();
  a->add_option("--pca-dim", anova.pca_dim,
                "Project tangent vectors onto this many principal axes (riem test)");
  add_metric(a, common);
  add_threads(a, common);
  add_seed(a, common);
  add_report(a, common);

  auto* h = app.add_subcommand("harmonize", "Remove site effects with ComBat or rigid transport");
  h->add_option("manifest", harm.manifest, "manifest.json with site labels")->required();
  h->add_option("--method", harm.method, "combat or rigid")->capture_default_str();
  h->add_option("--out-dir", harm.out_dir, "Directory for harmonized matrices")->required();
  add_metric(h, common);
  add_threads(h, common);
  add_report(h, common);

  auto* b = app.add_subcommand("bench", "Time Fréchet mean computation over a parameter grid");
  b->add_option("--n-list", bench.n_list, "Sample sizes")->delimiter(',')->capture_default_str();
  b->add_option("--p-list", bench.p_list, "Matrix sizes")->delimiter(',')->capture_default_str();
  b->add_option("--threads-list", bench.threads_list, "Thread counts")->delimiter(',')->capture_default_str();
  b->add_option("--batch-list", bench.batch_list, "Batch sizes or 'full'")->delimiter(',')->capture_default_str();
  b->add_option("--repeats", bench.repeats, "Timings per cell")->capture_default_str();
  b->add_option("--out", bench.out, "CSV of individual timings")->capture_default_str();
  b->add_option("--summary", bench.summary, "CSV of min/median/max per cell (repeats >= 3)");
  b->add_option("--lr", bench.lr, "Learning rate")->capture_default_str();
  b->add_option("--tol", bench.tol, "Tolerance")->capture_default_str();
  b->add_option("--max-iter", bench.max_iter, "Maximum epochs")->capture_default_str();
  add_metric(b, common);
  add_seed(b, common);
  add_report(b, common);

  try {
    common.threads = default_threads();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    parallel::set_num_threads(common.threads);
    if (g->parsed()) return run_gen(gen, common, echo);
    if (f->parsed()) return run_fmean(fmean, common, echo);
    if (a->parsed()) return run_anova(anova, common, echo);
    if (h->parsed()) return run_harmonize(harm, common, echo);
    if (b->parsed()) return run_bench(bench, common, echo);
  } catch (const SingularScatterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const DegenerateGroupError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kValidation;
}
