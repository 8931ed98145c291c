#include "spdstats/anova.hpp"

#include "spdstats/error.hpp"
#include "spdstats/parallel.hpp"
#include "spdstats/random.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace spdstats {

namespace {

// Ties between a permuted and the observed statistic are counted as at least
// as extreme; this absorbs rounding differences between identical designs.
double tie_tolerance(double observed) { return 1e-12 * std::max(1.0, std::abs(observed)); }

double permutation_p(std::size_t extreme, std::size_t iterations) {
  return static_cast<double>(1 + extreme) / static_cast<double>(1 + iterations);
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

struct GroupSummary {
  SpdMatrix mean;
  double variation;
  double sigma2;
};

GroupSummary summarize(std::span<const SpdMatrix> points, const MetricDescriptor& metric,
                       const FrechetConfig& config, const SpdMatrix& start, std::size_t group) {
  auto mean = frechet_mean(points, metric, config, start).mean;
  const auto frame = metric.at(mean);
  std::vector<double> sq(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    sq[i] = frame.vec(frame.log(points[i])).squaredNorm();
  }
  const double n = static_cast<double>(points.size());
  double v = 0.0;
  for (double x : sq) v += x;
  v /= n;
  double fourth = 0.0;
  double centered = 0.0;
  for (double x : sq) {
    fourth += x * x;
    centered += (x - v) * (x - v);
  }
  fourth /= n;
  centered /= n;
  if (!(centered > 1e-12 * fourth)) {
    throw DegenerateGroupError("group " + std::to_string(group) +
                               " has no spread in its squared distances to its Fréchet mean");
  }
  return {std::move(mean), v, centered};
}

struct FrechetStats {
  double f;
  double u;
  double t;
};

FrechetStats frechet_statistics(const std::vector<GroupSummary>& groups,
                                const std::vector<std::size_t>& sizes, double pooled_variation) {
  const double total = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
  const std::size_t k = groups.size();
  std::vector<double> lambda(k);
  for (std::size_t j = 0; j < k; ++j) lambda[j] = static_cast<double>(sizes[j]) / total;

  double f = pooled_variation;
  double u = 0.0;
  double inv_weight = 0.0;
  double scale_weight = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    f -= lambda[j] * groups[j].variation;
    inv_weight += lambda[j] / groups[j].sigma2;
    scale_weight += lambda[j] * lambda[j] * groups[j].sigma2;
    for (std::size_t l = j + 1; l < k; ++l) {
      const double diff = groups[j].variation - groups[l].variation;
      u += lambda[j] * lambda[l] / (groups[j].sigma2 * groups[l].sigma2) * diff * diff;
    }
  }
  const double t = total * u / inv_weight + total * f * f / scale_weight;
  return {f, u, t};
}

[[noreturn]] void singular(std::size_t n, std::size_t k, std::size_t d, const std::string& why) {
  throw SingularScatterError(
      why + " (N = " + std::to_string(n) + " matrices, k = " + std::to_string(k) +
      " groups, d = " + std::to_string(d) + " coordinates; Wilks needs N - k >= d). Project onto "
      "fewer principal axes with the pca_dim option (--pca-dim r on the command line, r <= " +
      std::to_string(n > k ? n - k : 0) + ").");
}

// Rows whitened by the total scatter, T = L L^T. With y_i = L^{-1}(x_i - mean)
// and m_j = sum_{i in j} y_i / sqrt(n_j), Pillai is ||M||_F^2 and Wilks is
// det(I - M M^T), because L^{-1} B L^{-T} = M^T M and L^{-1} W L^{-T} = I - M^T M.
class WhitenedDesign {
 public:
  WhitenedDesign(const Matrix& vectors, std::size_t k) : k_(k) {
    const auto n = static_cast<std::size_t>(vectors.rows());
    const auto d = static_cast<std::size_t>(vectors.cols());
    if (k < 2) throw ShapeError("MANOVA statistics need at least two groups");
    if (n < k + d) singular(n, k, d, "within-group scatter is singular");
    const Matrix centered = vectors.rowwise() - vectors.colwise().mean();
    Matrix total = centered.transpose() * centered;
    total = 0.5 * (total + total.transpose());
    const Eigen::LLT<Matrix> llt(total);
    const double scale = total.diagonal().maxCoeff();
    if (llt.info() != Eigen::Success || !(scale > 0.0)) singular(n, k, d, "total scatter is singular");
    const Matrix l = llt.matrixL();
    const Vector diag = l.diagonal();
    if (diag.minCoeff() * diag.minCoeff() < 1e-12 * scale) singular(n, k, d, "total scatter is singular");
    whitened_ = llt.matrixL().solve(centered.transpose()).transpose();
  }

  ManovaPair statistics(const std::vector<std::size_t>& labels) const {
    const auto d = whitened_.cols();
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(k_), d);
    std::vector<double> counts(k_, 0.0);
    for (Eigen::Index i = 0; i < whitened_.rows(); ++i) {
      const std::size_t j = labels[static_cast<std::size_t>(i)];
      m.row(static_cast<Eigen::Index>(j)) += whitened_.row(i);
      counts[j] += 1.0;
    }
    for (std::size_t j = 0; j < k_; ++j) {
      if (counts[j] > 0) m.row(static_cast<Eigen::Index>(j)) /= std::sqrt(counts[j]);
    }
    const Matrix mmt = m * m.transpose();
    const Matrix inner = Matrix::Identity(mmt.rows(), mmt.cols()) - mmt;
    const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (inner + inner.transpose()),
                                                   Eigen::EigenvaluesOnly);
    double log_wilks = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const double ev = es.eigenvalues()(i);
      if (!(ev > 0.0)) {
        throw SingularScatterError("within-group scatter is singular for this grouping");
      }
      log_wilks += std::log(ev);
    }
    return {log_wilks, mmt.trace()};
  }

 private:
  std::size_t k_;
  Matrix whitened_;
};

Eigen::LLT<Matrix> checked_cholesky(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  const double scale = m.diagonal().cwiseAbs().maxCoeff();
  if (llt.info() != Eigen::Success || !(scale > 0.0)) {
    throw SingularScatterError(std::string(what) + " scatter is singular");
  }
  const Matrix l = llt.matrixL();
  const double lo = l.diagonal().minCoeff();
  if (lo * lo < 1e-12 * scale) throw SingularScatterError(std::string(what) + " scatter is singular");
  return llt;
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  const Matrix l = llt.matrixL();
  return 2.0 * l.diagonal().array().log().sum();
}

void require_scatters(const SuperSample& ss) {
  if (!ss.scatters()) throw StateError("scatter matrices have not been computed");
}

}  // namespace

FrechetAnovaResult frechet_anova(const SuperSample& ss, std::size_t n_permutations,
                                 std::uint64_t seed, const FrechetConfig& config) {
  const std::size_t k = ss.num_groups();
  if (k < 2) throw ShapeError("Fréchet ANOVA needs at least two groups");
  const auto sizes = ss.group_sizes();
  for (std::size_t j = 0; j < k; ++j) {
    if (sizes[j] < 2) {
      throw ShapeError("Fréchet ANOVA needs at least two matrices per group; group " +
                       std::to_string(j) + " has " + std::to_string(sizes[j]));
    }
  }
  const auto& metric = ss.metric();

  std::vector<SpdMatrix> pooled;
  for (const auto& g : ss.groups()) {
    auto pts = g.manifold_points();
    for (auto& x : pts) pooled.push_back(std::move(x));
  }
  const std::size_t n = pooled.size();
  const auto start = ss.grand_mean().value_or(SpdMatrix::identity(ss.matrix_dim()));
  const auto pooled_summary = summarize(pooled, metric, config, start, k);

  const auto evaluate = [&](const std::vector<std::size_t>& order) {
    std::vector<GroupSummary> groups;
    std::size_t lo = 0;
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<SpdMatrix> members;
      members.reserve(sizes[j]);
      for (std::size_t i = lo; i < lo + sizes[j]; ++i) members.push_back(pooled[order[i]]);
      groups.push_back(summarize(members, metric, config, pooled_summary.mean, j));
      lo += sizes[j];
    }
    return std::pair{std::move(groups), frechet_statistics(groups, sizes, pooled_summary.variation)};
  };

  auto [groups, observed] = evaluate(identity_order(n));

  FrechetAnovaResult r{
      .group_variations = {}, .group_means = {}, .group_sigma2 = {}, .pooled_mean = pooled_summary.mean};
  for (auto& g : groups) {
    r.group_variations.push_back(g.variation);
    r.group_sigma2.push_back(g.sigma2);
    r.group_means.push_back(std::move(g.mean));
  }
  r.pooled_variation = pooled_summary.variation;
  r.f_stat = observed.f;
  r.u_stat = observed.u;
  r.t_stat = observed.t;
  r.p_asymptotic = boost::math::gamma_q(0.5 * static_cast<double>(k - 1),
                                        0.5 * std::max(0.0, observed.t));
  r.n_permutations = n_permutations;

  const auto permuted = parallel::map<double>(n_permutations, [&](std::size_t b) {
    auto order = identity_order(n);
    Rng::stream(seed, Rng::Purpose::kPermutation, b).shuffle(std::span<std::size_t>(order));
    return evaluate(order).second.t;
  });
  std::size_t extreme = 0;
  for (double t : permuted) extreme += (t >= observed.t - tie_tolerance(observed.t)) ? 1 : 0;
  r.p_permutation = permutation_p(extreme, n_permutations);
  return r;
}

double log_wilks_lambda(const Scatters& s) {
  return log_det(checked_cholesky(s.within, "within-group")) -
         log_det(checked_cholesky(s.total, "total"));
}

double pillais_trace(const Scatters& s) {
  const auto llt = checked_cholesky(s.total, "total");
  const Matrix l = llt.matrixL();
  const Matrix half = l.triangularView<Eigen::Lower>().solve(s.between);
  const Matrix whitened = l.triangularView<Eigen::Lower>().solve(half.transpose());
  return whitened.trace();
}

double log_wilks_lambda(const SuperSample& ss) {
  require_scatters(ss);
  return log_wilks_lambda(*ss.scatters());
}

double pillais_trace(const SuperSample& ss) {
  require_scatters(ss);
  return pillais_trace(*ss.scatters());
}

ManovaPair manova_statistics(const Matrix& vectors, const std::vector<std::size_t>& labels,
                             std::size_t num_groups) {
  if (static_cast<std::size_t>(vectors.rows()) != labels.size()) {
    throw ShapeError("one label per row is required");
  }
  return WhitenedDesign(vectors, num_groups).statistics(labels);
}

RiemAnovaResult riem_anova(SuperSample& ss, const RiemAnovaOptions& options) {
  const std::size_t k = ss.num_groups();
  if (k < 2) throw ShapeError("Riemannian ANOVA needs at least two groups");
  if (options.n_iterations < 1) throw std::invalid_argument("n_iterations must be at least 1");
  if (!ss.grand_mean()) ss.compute_grand_mean(options.grand_mean_config);
  if (!ss.scatters()) ss.compute_scatters();

  Matrix x = ss.stacked_vectors();
  if (options.pca_dim) {
    const std::size_t r = *options.pca_dim;
    if (r < 1 || r > ss.coord_dim()) {
      throw std::invalid_argument("pca_dim must lie in [1, " + std::to_string(ss.coord_dim()) + "]");
    }
    const auto basis = sym_eig(SymMatrix::from_dense(ss.scatters()->total));
    const Matrix centered = x.rowwise() - x.colwise().mean();
    x = centered * basis.eigenvectors.leftCols(static_cast<Eigen::Index>(r));
  }

  const auto labels = ss.labels();
  const WhitenedDesign design(x, k);
  const auto pick = [&](const ManovaPair& s) {
    return options.stat == ManovaStat::kLogWilks ? s.log_wilks : s.pillai;
  };
  const double observed = pick(design.statistics(labels));

  const auto permuted = parallel::map<double>(options.n_iterations, [&](std::size_t b) {
    auto shuffled = labels;
    Rng::stream(options.seed, Rng::Purpose::kPermutation, b)
        .shuffle(std::span<std::size_t>(shuffled));
    return pick(design.statistics(shuffled));
  });

  const double tol = tie_tolerance(observed);
  std::size_t extreme = 0;
  for (double s : permuted) {
    const bool as_extreme =
        options.stat == ManovaStat::kLogWilks ? s <= observed + tol : s >= observed - tol;
    extreme += as_extreme ? 1 : 0;
  }
  return {options.stat, observed, permutation_p(extreme, options.n_iterations),
          options.n_iterations, static_cast<std::size_t>(x.cols())};
}

}  // namespace spdstats
