#include "spdstats/cluster.hpp"
#include "spdstats/error.hpp"
#include "spdstats/harmonize.hpp"
#include "support/test_support.hpp"

#include <doctest.h>

using namespace spdstats;
using namespace spdstats::testing;

namespace {

SuperSample batch_design(std::size_t n, std::size_t p, std::uint64_t seed,
                         const MetricDescriptor& metric = airm_metric(), double shift = 1.5) {
  const auto d = static_cast<Eigen::Index>(manifold_dim(p));
  const auto pp = static_cast<Eigen::Index>(p);
  return SuperSample({rspdnorm(n, SpdMatrix::identity(p), Matrix::Identity(d, d), metric, seed),
                      rspdnorm(n, spd(shift * Matrix::Identity(pp, pp)), Matrix::Identity(d, d),
                               metric, seed + 1)});
}

std::vector<long> site_labels(const SuperSample& ss) {
  std::vector<long> out;
  for (auto l : ss.labels()) out.push_back(static_cast<long>(l));
  return out;
}

double site_silhouette(SuperSample ss) {
  ss.compute_grand_mean();
  ss.compute_scatters();
  return silhouette_score(ss.stacked_vectors(), site_labels(ss));
}

double max_point_error(const SuperSample& a, const SuperSample& b) {
  double worst = 0.0;
  for (std::size_t j = 0; j < a.num_groups(); ++j) {
    const auto pa = a.group(j).manifold_points();
    const auto pb = b.group(j).manifold_points();
    for (std::size_t i = 0; i < pa.size(); ++i) worst = std::max(worst, rel_err(pa[i], pb[i]));
  }
  return worst;
}

}  // namespace

TEST_CASE("ComBat leaves identical sites unchanged") {
  Rng rng = Rng::stream(80, Rng::Purpose::kGeneric);
  std::vector<SpdMatrix> pts;
  for (int i = 0; i < 12; ++i) pts.push_back(random_spd(3, 20, rng));
  const auto site = ConnectomeSample::from_connectomes(pts, airm_metric());
  SuperSample ss({site, site});
  const auto r = combat_harmonization(ss);
  CHECK(max_point_error(r.harmonized, ss) < 1e-8);
  CHECK(r.model.gamma_star.cwiseAbs().maxCoeff() < 1e-8);
  CHECK((r.model.delta2_star.array() - 1.0).abs().maxCoeff() < 1e-8);
}

TEST_CASE("ComBat removes a site shift") {
  auto ss = batch_design(30, 3, 21);
  const double before = site_silhouette(ss);
  const auto r = combat_harmonization(ss);
  const double after = site_silhouette(r.harmonized);
  CHECK(std::abs(after) < 0.1);
  CHECK(std::abs(after) < std::abs(before));
  for (const auto& g : r.harmonized.groups()) {
    for (const auto& x : g.connectomes()) CHECK_NOTHROW(validate_spd(x.sym()));
  }
  CHECK(r.harmonized.size() == 60);
  CHECK(r.model.constant_features.empty());
  CHECK(r.model.iterations >= 1);
  CHECK(r.model.iterations <= 100);
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(r.model.delta2_star.row(j).minCoeff() > 0.0);
}

TEST_CASE("ComBat on already harmonized data moves little") {
  auto ss = batch_design(30, 3, 23);
  auto once = combat_harmonization(ss).harmonized;
  const Matrix original = ss.stacked_vectors();
  once.compute_grand_mean();
  once.compute_scatters();
  const Matrix first = once.stacked_vectors();
  auto twice = combat_harmonization(once).harmonized;
  twice.compute_grand_mean();
  twice.compute_scatters();
  const Matrix second = twice.stacked_vectors();
  const double first_change = (first - original).cwiseAbs().maxCoeff();
  const double second_change = (second - first).cwiseAbs().maxCoeff();
  MESSAGE("first-pass change: " << first_change << ", second-pass change: " << second_change);
  CHECK(second_change < first_change);
  CHECK(second_change < 1e-6);
}

TEST_CASE("ComBat passes constant coordinates through") {
  // every matrix is diagonal, so the off-diagonal tangent coordinates at a
  // diagonal grand mean are exactly zero
  Rng rng = Rng::stream(81, Rng::Purpose::kGeneric);
  std::vector<ConnectomeSample> sites;
  for (int j = 0; j < 2; ++j) {
    std::vector<SpdMatrix> pts;
    for (int i = 0; i < 10; ++i) {
      pts.push_back(diag_spd({std::exp(rng.normal() + j), std::exp(rng.normal()), std::exp(rng.normal())}));
    }
    sites.push_back(ConnectomeSample::from_connectomes(pts, log_euclidean_metric()));
  }
  SuperSample ss(sites);
  const auto r = combat_harmonization(ss);
  CHECK(r.model.constant_features == std::vector<std::size_t>{1, 2, 4});
  for (const auto& g : r.harmonized.groups()) {
    for (const auto& x : g.connectomes()) CHECK(std::abs(x.dense()(0, 1)) < 1e-12);
  }
}

TEST_CASE("ComBat preconditions and cone failures") {
  Rng rng = Rng::stream(82, Rng::Purpose::kGeneric);
  const auto a = ConnectomeSample::from_connectomes({random_spd(2, 5, rng), random_spd(2, 5, rng)},
                                                    airm_metric());
  SuperSample one({a});
  CHECK_THROWS_AS(combat_harmonization(one), ShapeError);

  // A tight site is stretched to the pooled spread of a site whose
  // off-diagonal entries vary widely: its Euclidean images leave the cone.
  std::vector<SpdMatrix> tight, wide;
  for (int i = 0; i < 15; ++i) {
    Matrix t(2, 2), w(2, 2);
    t << 1 + 1e-3 * rng.normal(), 1e-2 * rng.normal(), 0, 1 + 1e-3 * rng.normal();
    w << 10 + 1e-3 * rng.normal(), 9 * (2 * rng.uniform() - 1), 0, 10 + 1e-3 * rng.normal();
    t(1, 0) = t(0, 1);
    w(1, 0) = w(0, 1);
    tight.push_back(spd(t));
    wide.push_back(spd(w));
  }
  SuperSample ss({ConnectomeSample::from_connectomes(tight, euclidean_metric()),
                  ConnectomeSample::from_connectomes(wide, euclidean_metric())});
  try {
    combat_harmonization(ss);
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("indices") != std::string::npos);
    CHECK(e.index() >= 0);
  } catch (...) {
    FAIL("unexpected exception type");
  }
}

TEST_CASE("rigid harmonization aligns site means") {
  for (const auto* m : {&airm_metric(), &log_euclidean_metric(), &euclidean_metric()}) {
    CAPTURE(m->name);
    auto ss = m == &euclidean_metric() ? [] {
      Rng rng = Rng::stream(83, Rng::Purpose::kGeneric);
      std::vector<ConnectomeSample> sites;
      for (double shift : {1.0, 1.5}) {
        std::vector<SpdMatrix> pts;
        for (int i = 0; i < 20; ++i) pts.push_back(spd(shift * random_spd(3, 5, rng).dense()));
        sites.push_back(ConnectomeSample::from_connectomes(pts, euclidean_metric()));
      }
      return SuperSample(sites);
    }() : batch_design(30, 3, 31, *m);
    ss.compute_grand_mean();
    ss.compute_scatters();
    const double between_before = ss.scatters()->between.trace();
    const SpdMatrix mu = *ss.grand_mean();

    auto out = rigid_harmonization(ss);
    for (const auto& g : out.groups()) {
      const auto pts = g.manifold_points();
      const auto site_mean = frechet_mean(pts, *m, FrechetConfig{}, mu).mean;
      CHECK(rel_err(site_mean, mu) < FrechetConfig{}.tolerance);
      CHECK(rel_err(site_mean, mu) < 1e-6);
    }
    out.compute_grand_mean();
    out.compute_scatters();
    CHECK(out.scatters()->between.trace() * 10.0 <= between_before);
  }
}

TEST_CASE("rigid harmonization of one site is the identity") {
  Rng rng = Rng::stream(84, Rng::Purpose::kGeneric);
  std::vector<SpdMatrix> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(random_spd(4, 30, rng));
  SuperSample ss({ConnectomeSample::from_connectomes(pts, airm_metric())});
  const auto out = rigid_harmonization(ss);
  CHECK(max_point_error(out, ss) < 1e-8);
}

TEST_CASE("rigid harmonization needs parallel transport") {
  for (const auto* m : {&log_cholesky_metric(), &bures_wasserstein_metric()}) {
    auto ss = batch_design(5, 2, 1, *m);
    CHECK_THROWS_AS(rigid_harmonization(ss), UnsupportedMetric);
  }
}
