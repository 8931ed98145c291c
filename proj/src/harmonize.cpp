#include "spdstats/harmonize.hpp"

#include "spdstats/error.hpp"
#include "spdstats/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spdstats {

namespace {

constexpr double kShrinkTolerance = 1e-6;
constexpr std::size_t kMaxShrinkIterations = 100;
// Prior variances this small (relative to the data scale) make the
// shrinkage estimators collapse onto their limits.
constexpr double kDegenerate = 1e-12;

// Maps each harmonized tangent back to the manifold and reports every
// matrix that fails, not only the first.
std::vector<SpdMatrix> exp_all(const TangentFrame& frame, const std::vector<SymMatrix>& tangents,
                               std::size_t offset, std::vector<std::size_t>& failures) {
  std::vector<std::optional<SpdMatrix>> slots(tangents.size());
  parallel::parallel_for(tangents.size(), [&](std::size_t i) {
    try {
      slots[i].emplace(frame.exp(tangents[i]));
    } catch (const DomainError&) {
    }
  });
  std::vector<SpdMatrix> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else {
      failures.push_back(offset + i);
    }
  }
  return out;
}

[[noreturn]] void report_failures(const char* who, const std::vector<std::size_t>& failures) {
  std::string list;
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (i) list += ", ";
    list += std::to_string(failures[i]);
  }
  throw DomainError(std::string(who) + ": harmonized matrices left the SPD cone at pooled indices " +
                        list,
                    0.0, static_cast<std::ptrdiff_t>(failures.front()));
}

void require_sites(const SuperSample& ss, const char* who) {
  if (ss.num_groups() < 2) throw ShapeError(std::string(who) + " needs at least two sites");
  for (std::size_t j = 0; j < ss.num_groups(); ++j) {
    if (ss.group(j).size() < 2) {
      throw ShapeError(std::string(who) + ": site " + std::to_string(j) +
                       " has fewer than two matrices");
    }
  }
}

double sample_variance(const Vector& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

struct SiteShrinkage {
  Vector gamma;
  Vector delta2;
  std::size_t iterations;
};

// Empirical-Bayes posterior estimates for one site; z holds that site's
// standardized rows restricted to the active features.
SiteShrinkage shrink_site(const Matrix& z, const Vector& gamma_hat, const Vector& delta2_hat,
                          double gamma_bar, double tau2, double a, double b, bool flat_tau,
                          bool flat_delta, double delta_limit) {
  const double n = static_cast<double>(z.rows());
  const auto sum_sq = [&](const Vector& gamma) {
    return Vector((z.rowwise() - gamma.transpose()).colwise().squaredNorm().transpose());
  };
  const auto update_gamma = [&](const Vector& delta2) {
    if (flat_tau) return Vector(Vector::Constant(gamma_hat.size(), gamma_bar));
    return Vector(((n * tau2) * gamma_hat.array() + delta2.array() * gamma_bar) /
                  (n * tau2 + delta2.array()));
  };

  if (flat_delta) {
    const Vector delta2 = Vector::Constant(gamma_hat.size(), delta_limit);
    return {update_gamma(delta2), delta2, 1};
  }

  Vector gamma = gamma_hat;
  Vector delta2 = delta2_hat;
  std::size_t it = 0;
  while (it < kMaxShrinkIterations) {
    ++it;
    const Vector g_new = update_gamma(delta2);
    const Vector d_new = ((b + 0.5 * sum_sq(g_new).array()) / (0.5 * n + a - 1.0)).matrix();
    const double change = std::max(
        ((g_new - gamma).array().abs() / gamma.array().abs().max(1.0)).maxCoeff(),
        ((d_new - delta2).array().abs() / delta2.array().abs().max(1.0)).maxCoeff());
    gamma = g_new;
    delta2 = d_new;
    if (change < kShrinkTolerance) break;
  }
  return {gamma, delta2, it};
}

}  // namespace

CombatResult combat_harmonization(SuperSample& ss, const FrechetConfig& config) {
  require_sites(ss, "combat_harmonization");
  if (!ss.grand_mean()) ss.compute_grand_mean(config);
  if (!ss.scatters()) ss.compute_scatters();
  const SpdMatrix mu = *ss.grand_mean();
  const Matrix& y = ss.stacked_vectors();
  const auto sizes = ss.group_sizes();
  const std::size_t k = sizes.size();
  const Eigen::Index g_all = y.cols();
  const double total = static_cast<double>(y.rows());

  std::vector<Eigen::Index> starts(k, 0);
  for (std::size_t j = 1; j < k; ++j) starts[j] = starts[j - 1] + static_cast<Eigen::Index>(sizes[j - 1]);
  const auto site_rows = [&](const Matrix& m, std::size_t j) {
    return m.middleRows(starts[j], static_cast<Eigen::Index>(sizes[j]));
  };

  CombatModel model;
  model.grand_location = y.colwise().mean().transpose();
  Matrix site_means(static_cast<Eigen::Index>(k), g_all);
  for (std::size_t j = 0; j < k; ++j) site_means.row(static_cast<Eigen::Index>(j)) = site_rows(y, j).colwise().mean();

  Vector var = Vector::Zero(g_all);
  for (std::size_t j = 0; j < k; ++j) {
    var += (site_rows(y, j).rowwise() - site_means.row(static_cast<Eigen::Index>(j)))
               .colwise()
               .squaredNorm()
               .transpose();
  }
  var /= total;
  model.pooled_scale = var.cwiseSqrt();

  std::vector<Eigen::Index> active;
  for (Eigen::Index g = 0; g < g_all; ++g) {
    const double scale = 1.0 + y.col(g).cwiseAbs().maxCoeff();
    if (model.pooled_scale(g) <= kDegenerate * scale) {
      model.constant_features.push_back(static_cast<std::size_t>(g));
    } else {
      active.push_back(g);
    }
  }
  const auto ga = static_cast<Eigen::Index>(active.size());

  Matrix z(y.rows(), ga);
  for (Eigen::Index c = 0; c < ga; ++c) {
    const Eigen::Index g = active[static_cast<std::size_t>(c)];
    z.col(c) = (y.col(g).array() - model.grand_location(g)) / model.pooled_scale(g);
  }

  const auto kk = static_cast<Eigen::Index>(k);
  model.gamma_hat = Matrix::Zero(kk, g_all);
  model.delta2_hat = Matrix::Ones(kk, g_all);
  model.gamma_star = Matrix::Zero(kk, g_all);
  model.delta2_star = Matrix::Ones(kk, g_all);
  model.gamma_bar = Vector::Zero(kk);
  model.tau2 = Vector::Zero(kk);
  model.a_prior = Vector::Zero(kk);
  model.b_prior = Vector::Zero(kk);

  Matrix adjusted = y;
  for (std::size_t j = 0; j < k && ga > 0; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const Matrix zj = site_rows(z, j);
    const Vector gamma_hat = zj.colwise().mean().transpose();
    const Vector delta2_hat =
        (zj.rowwise() - gamma_hat.transpose()).colwise().squaredNorm().transpose() /
        static_cast<double>(zj.rows());

    const double gamma_bar = gamma_hat.mean();
    const double tau2 = sample_variance(gamma_hat);
    const double m = delta2_hat.mean();
    const double s2 = sample_variance(delta2_hat);
    const bool flat_tau = tau2 <= kDegenerate;
    const bool flat_delta = s2 <= kDegenerate * std::max(m * m, 1e-300);
    const double a = flat_delta ? 0.0 : (m * m + 2.0 * s2) / s2;
    const double b = flat_delta ? 0.0 : (m * m * m + m * s2) / s2;
    const auto post = shrink_site(zj, gamma_hat, delta2_hat, gamma_bar, tau2, a, b, flat_tau,
                                  flat_delta, m > 0.0 ? m : 1.0);

    model.gamma_bar(jj) = gamma_bar;
    model.tau2(jj) = tau2;
    model.a_prior(jj) = a;
    model.b_prior(jj) = b;
    model.iterations = std::max(model.iterations, post.iterations);
    for (Eigen::Index c = 0; c < ga; ++c) {
      const Eigen::Index g = active[static_cast<std::size_t>(c)];
      model.gamma_hat(jj, g) = gamma_hat(c);
      model.delta2_hat(jj, g) = delta2_hat(c);
      model.gamma_star(jj, g) = post.gamma(c);
      model.delta2_star(jj, g) = post.delta2(c);
      const double scale = std::sqrt(post.delta2(c));
      auto out = adjusted.middleRows(starts[j], static_cast<Eigen::Index>(sizes[j])).col(g);
      out = ((zj.col(c).array() - post.gamma(c)) / scale * model.pooled_scale(g) +
             model.grand_location(g))
                .matrix();
    }
  }

  const auto frame = ss.metric().at(mu);
  std::vector<ConnectomeSample> sites;
  std::vector<std::size_t> failures;
  for (std::size_t j = 0; j < k; ++j) {
    const Matrix rows = site_rows(adjusted, j);
    std::vector<SymMatrix> tangents = parallel::map<SymMatrix>(sizes[j], [&](std::size_t i) {
      return frame.unvec(rows.row(static_cast<Eigen::Index>(i)).transpose());
    });
    auto conns = exp_all(frame, tangents, static_cast<std::size_t>(starts[j]), failures);
    if (failures.empty()) sites.push_back(ConnectomeSample::from_connectomes(std::move(conns), ss.metric()));
  }
  if (!failures.empty()) report_failures("combat_harmonization", failures);
  return {SuperSample(std::move(sites), ss.metric()), std::move(model)};
}

SuperSample rigid_harmonization(SuperSample& ss, const FrechetConfig& config) {
  const auto& metric = ss.metric();
  if (!metric.supports_transport()) {
    throw UnsupportedMetric("rigid harmonization needs parallel transport, which the '" +
                            metric.name + "' metric does not provide");
  }
  if (!ss.grand_mean()) ss.compute_grand_mean(config);
  const SpdMatrix mu = *ss.grand_mean();
  const auto target = metric.at(mu);

  std::vector<ConnectomeSample> sites;
  std::vector<std::size_t> failures;
  std::size_t offset = 0;
  for (const auto& group : ss.groups()) {
    const auto points = group.manifold_points();
    const SpdMatrix site_mean = frechet_mean(points, metric, config, mu).mean;
    const auto source = metric.at(site_mean);
    const auto moved = parallel::map<SymMatrix>(points.size(), [&](std::size_t i) {
      return metric.transport(site_mean, mu, source.log(points[i]));
    });
    auto conns = exp_all(target, moved, offset, failures);
    if (failures.empty()) sites.push_back(ConnectomeSample::from_connectomes(std::move(conns), metric));
    offset += points.size();
  }
  if (!failures.empty()) report_failures("rigid_harmonization", failures);
  return SuperSample(std::move(sites), metric);
}

}  // namespace spdstats
