#include "spdstats/anova.hpp"
#include "spdstats/error.hpp"
#include "spdstats/parallel.hpp"
#include "support/test_support.hpp"

#include <doctest.h>

#include <string>

using namespace spdstats;
using namespace spdstats::testing;

namespace {

ConnectomeSample random_group(std::size_t n, Eigen::Index p, double cond, Rng& rng,
                              const MetricDescriptor& metric = airm_metric()) {
  std::vector<SpdMatrix> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(random_spd(p, cond, rng));
  return ConnectomeSample::from_connectomes(std::move(pts), metric);
}

SuperSample scaled_identity_design(std::size_t n, std::size_t p, std::uint64_t seed,
                                   std::vector<double> scales = {1, 2, 3}) {
  const auto d = static_cast<Eigen::Index>(manifold_dim(p));
  const auto pp = static_cast<Eigen::Index>(p);
  std::vector<ConnectomeSample> groups;
  for (std::size_t j = 0; j < scales.size(); ++j) {
    groups.push_back(rspdnorm(n, spd(scales[j] * Matrix::Identity(pp, pp)), Matrix::Identity(d, d),
                              airm_metric(), seed * 10 + j));
  }
  return SuperSample(groups);
}

// upper-triangle coordinates with sqrt(2) off-diagonal weights
Vector euclidean_coords(const Matrix& x) {
  const Eigen::Index p = x.rows();
  Vector v(p * (p + 1) / 2);
  Eigen::Index c = 0;
  for (Eigen::Index r = 0; r < p; ++r)
    for (Eigen::Index q = r; q < p; ++q) v(c++) = (r == q ? 1.0 : std::sqrt(2.0)) * x(r, q);
  return v;
}

}  // namespace

TEST_CASE("Fréchet ANOVA on identical groups") {
  Rng rng = Rng::stream(60, Rng::Purpose::kGeneric);
  const auto g = random_group(8, 3, 20, rng);
  const SuperSample ss({g, g});
  const auto r = frechet_anova(ss, 50, 1);
  CHECK(std::abs(r.f_stat) < 1e-10);
  CHECK(r.u_stat < 1e-20);
  CHECK(r.p_permutation == 1.0);
  CHECK(r.n_permutations == 50);
  CHECK(r.group_variations[0] == doctest::Approx(r.group_variations[1]).epsilon(1e-10));
  REQUIRE(r.p_asymptotic);
  CHECK(*r.p_asymptotic > 0.99);
}

TEST_CASE("Fréchet ANOVA detects shifted means") {
  const auto ss = scaled_identity_design(20, 3, 1, {1, 4, 16});
  const auto r = frechet_anova(ss, 100, 2);
  CHECK(r.p_permutation < 0.05);
  CHECK(r.p_permutation == doctest::Approx(1.0 / 101.0));
  CHECK(*r.p_asymptotic < 0.05);
  CHECK(r.group_means.size() == 3);
  CHECK(r.f_stat > 0.0);
}

TEST_CASE("Fréchet ANOVA invariants") {
  Rng rng = Rng::stream(61, Rng::Purpose::kGeneric);
  for (int trial = 0; trial < 6; ++trial) {
    const auto* metric = trial % 2 == 0 ? &airm_metric() : &log_euclidean_metric();
    auto a = random_group(5 + rng.below(5), 3, 30, rng, *metric);
    auto b = random_group(5 + rng.below(5), 3, 30, rng, *metric);
    const auto r = frechet_anova(SuperSample({a, b}), 20, 3);
    CHECK(r.f_stat >= -1e-10);
    CHECK(r.pooled_variation >= 0.0);
    for (double v : r.group_variations) CHECK(v >= 0.0);
    CHECK(r.p_permutation > 0.0);
    CHECK(r.p_permutation <= 1.0);
    CHECK(*r.p_asymptotic >= 0.0);
    CHECK(*r.p_asymptotic <= 1.0);

    const auto swapped = frechet_anova(SuperSample({b, a}), 20, 3);
    CHECK(swapped.t_stat == doctest::Approx(r.t_stat).epsilon(1e-6));
    CHECK(swapped.f_stat == doctest::Approx(r.f_stat).epsilon(1e-6).scale(1e-9));
  }
}

TEST_CASE("Fréchet ANOVA preconditions") {
  Rng rng = Rng::stream(62, Rng::Purpose::kGeneric);
  const auto g = random_group(6, 3, 20, rng);
  CHECK_THROWS_AS(frechet_anova(SuperSample({g}), 10, 1), ShapeError);
  const auto single = ConnectomeSample::from_connectomes({random_spd(3, 5, rng)}, airm_metric());
  CHECK_THROWS_AS(frechet_anova(SuperSample({g, single}), 10, 1), ShapeError);
  const auto a = random_spd(3, 5, rng);
  const auto flat = ConnectomeSample::from_connectomes({a, a, a}, airm_metric());
  CHECK_THROWS_AS(frechet_anova(SuperSample({g, flat}), 10, 1), DegenerateGroupError);
}

TEST_CASE("Fréchet ANOVA is reproducible across thread counts") {
  const auto ss = scaled_identity_design(8, 2, 4);
  std::vector<FrechetAnovaResult> out;
  for (std::size_t t : {1, 2, 8}) {
    parallel::ScopedThreads scoped(t);
    out.push_back(frechet_anova(ss, 30, 9));
  }
  for (const auto& r : out) {
    CHECK(r.t_stat == out[0].t_stat);
    CHECK(r.p_permutation == out[0].p_permutation);
  }
}

TEST_CASE("Wilks and Pillai match a direct MANOVA computation") {
  Rng rng = Rng::stream(63, Rng::Purpose::kGeneric);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<ConnectomeSample> groups;
    std::vector<std::vector<Vector>> raw;
    const std::size_t k = 2 + rng.below(3);
    for (std::size_t j = 0; j < k; ++j) {
      auto g = random_group(6 + rng.below(6), 3, 20, rng, euclidean_metric());
      std::vector<Vector> v;
      for (const auto& x : g.connectomes()) v.push_back(euclidean_coords(x.dense()));
      raw.push_back(v);
      groups.push_back(g);
    }
    SuperSample ss(groups);
    ss.compute_grand_mean();
    ss.compute_scatters();

    Vector grand = Vector::Zero(6);
    double n = 0;
    for (const auto& g : raw)
      for (const auto& v : g) {
        grand += v;
        n += 1;
      }
    grand /= n;
    Matrix w = Matrix::Zero(6, 6), b = Matrix::Zero(6, 6);
    for (const auto& g : raw) {
      Vector m = Vector::Zero(6);
      for (const auto& v : g) m += v / static_cast<double>(g.size());
      for (const auto& v : g) w += (v - m) * (v - m).transpose();
      b += static_cast<double>(g.size()) * (m - grand) * (m - grand).transpose();
    }
    const Matrix t = w + b;
    const Eigen::EigenSolver<Matrix> ratio(t.inverse() * w);
    double naive_wilks = 0.0;
    for (Eigen::Index i = 0; i < 6; ++i) naive_wilks += std::log(ratio.eigenvalues()(i).real());
    const double naive_pillai = (b * t.inverse()).trace();

    const double wilks = log_wilks_lambda(ss);
    const double pillai = pillais_trace(ss);
    CHECK(std::abs(wilks - naive_wilks) < 1e-10 * std::max(1.0, std::abs(naive_wilks)));
    CHECK(std::abs(pillai - naive_pillai) < 1e-10);
    CHECK(pillai >= 0.0);
    CHECK(pillai <= static_cast<double>(std::min<std::size_t>(k - 1, 6)) + 1e-12);

    // whitened route used by the permutation test
    const auto pair = manova_statistics(ss.stacked_vectors(), ss.labels(), k);
    CHECK(pair.log_wilks == doctest::Approx(wilks).epsilon(1e-10));
    CHECK(pair.pillai == doctest::Approx(pillai).epsilon(1e-10));

    // invariance under a common invertible linear map
    const Matrix a = gaussian_matrix(6, 6, rng) + 3.0 * Matrix::Identity(6, 6);
    const auto moved = manova_statistics(ss.stacked_vectors() * a, ss.labels(), k);
    CHECK(std::abs(moved.log_wilks - pair.log_wilks) < 1e-8);
    CHECK(std::abs(moved.pillai - pair.pillai) < 1e-8);
  }
}

TEST_CASE("identical groups give a zero between scatter") {
  Rng rng = Rng::stream(64, Rng::Purpose::kGeneric);
  const auto g = random_group(6, 2, 20, rng);
  SuperSample ss({g, g});
  ss.compute_grand_mean();
  ss.compute_scatters();
  CHECK(std::abs(pillais_trace(ss)) < 1e-12);
  CHECK(std::abs(log_wilks_lambda(ss)) < 1e-12);

  RiemAnovaOptions one;
  one.n_iterations = 1;
  for (auto stat : {ManovaStat::kLogWilks, ManovaStat::kPillai}) {
    one.stat = stat;
    const auto r = riem_anova(ss, one);
    CHECK(r.p_value == 1.0);
    CHECK(r.n_iterations == 1);
  }
}

TEST_CASE("singular scatter handling") {
  Rng rng = Rng::stream(65, Rng::Purpose::kGeneric);
  SuperSample ss({random_group(4, 4, 10, rng), random_group(4, 4, 10, rng)});
  CHECK_THROWS_AS(log_wilks_lambda(ss), StateError);
  ss.compute_grand_mean();
  ss.compute_scatters();
  CHECK_THROWS_AS(log_wilks_lambda(ss), SingularScatterError);
  CHECK_THROWS_AS(pillais_trace(ss), SingularScatterError);
  try {
    riem_anova(ss);
    FAIL("expected SingularScatterError");
  } catch (const SingularScatterError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("N = 8") != std::string::npos);
    CHECK(msg.find("k = 2") != std::string::npos);
    CHECK(msg.find("d = 10") != std::string::npos);
    CHECK(msg.find("pca") != std::string::npos);
  }
  RiemAnovaOptions opt;
  opt.pca_dim = 4;
  opt.n_iterations = 20;
  const auto r = riem_anova(ss, opt);
  CHECK(r.dim == 4);
  CHECK(r.p_value > 0.0);
  opt.pca_dim = 11;
  CHECK_THROWS_AS(riem_anova(ss, opt), std::invalid_argument);
}

TEST_CASE("Riemannian ANOVA detects shifted means") {
  for (auto stat : {ManovaStat::kLogWilks, ManovaStat::kPillai}) {
    auto ss = scaled_identity_design(20, 3, 7);
    RiemAnovaOptions opt;
    opt.stat = stat;
    opt.n_iterations = 100;
    opt.seed = 5;
    const auto r = riem_anova(ss, opt);
    CHECK(r.p_value <= 0.05);
    CHECK(r.dim == 6);
  }
}

TEST_CASE("Riemannian ANOVA reproducibility and relabelling") {
  Rng rng = Rng::stream(66, Rng::Purpose::kGeneric);
  const auto a = random_group(12, 2, 20, rng);
  const auto b = random_group(12, 2, 20, rng);
  RiemAnovaOptions opt;
  opt.n_iterations = 200;
  opt.seed = 11;
  std::vector<double> ps;
  for (std::size_t t : {1, 2, 8}) {
    parallel::ScopedThreads scoped(t);
    SuperSample ss({a, b});
    ps.push_back(riem_anova(ss, opt).p_value);
  }
  CHECK(ps[0] == ps[1]);
  CHECK(ps[0] == ps[2]);
  CHECK(ps[0] > 0.0);
  CHECK(ps[0] <= 1.0);

  SuperSample ab({a, b});
  SuperSample ba({b, a});
  const auto r1 = riem_anova(ab, opt);
  const auto r2 = riem_anova(ba, opt);
  CHECK(r1.statistic == doctest::Approx(r2.statistic).epsilon(1e-9));
  CHECK(std::abs(r1.p_value - r2.p_value) < 0.15);
}
