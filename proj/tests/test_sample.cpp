#include "spdstats/error.hpp"
#include "spdstats/parallel.hpp"
#include "spdstats/sample.hpp"
#include "support/test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace spdstats;
using namespace spdstats::testing;

namespace {

std::vector<SpdMatrix> random_points(std::size_t n, Eigen::Index p, double cond, Rng& rng) {
  std::vector<SpdMatrix> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_spd(p, cond, rng));
  return out;
}

FrechetConfig unit_step() {
  FrechetConfig c;
  c.learning_rate = 1.0;
  c.tolerance = 1e-12;
  c.max_iterations = 100;
  return c;
}

void check_consistent(const ConnectomeSample& s) {
  const auto frame = s.metric().at(*s.reference());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.has_connectomes() && s.has_tangents()) {
      CHECK(rel_err(frame.exp(s.tangent_images()[i]), s.connectomes()[i]) < 1e-8);
    }
    if (s.has_vectors() && s.has_tangents()) {
      const Vector want = frame.vec(s.tangent_images()[i]);
      CHECK((s.vector_images().row(static_cast<Eigen::Index>(i)).transpose() - want).norm() <=
            1e-12 * (1.0 + want.norm()));
    }
  }
}

}  // namespace

TEST_CASE("construction from connectomes") {
  const auto s = ConnectomeSample::from_connectomes(
      {SpdMatrix::identity(3), spd(2.0 * Matrix::Identity(3, 3))}, airm_metric());
  CHECK(s.size() == 2);
  CHECK(s.matrix_dim() == 3);
  CHECK(s.coord_dim() == 6);
  CHECK(s.has_connectomes());
  CHECK_FALSE(s.has_tangents());
  CHECK_FALSE(s.has_vectors());
  CHECK_FALSE(s.frechet_mean());
  CHECK_FALSE(s.is_centered());

  try {
    ConnectomeSample::from_symmetric(
        {SymMatrix::identity(2), SymMatrix::identity(2), SymMatrix::from_packed(2, {1, 0, -1})},
        airm_metric());
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(e.index() == 2);
  }
  CHECK_THROWS_AS(ConnectomeSample::from_connectomes({}, airm_metric()), ShapeError);
  CHECK_THROWS_AS(ConnectomeSample::from_connectomes(
                      {SpdMatrix::identity(2), SpdMatrix::identity(3)}, airm_metric()),
                  ShapeError);

  Rng rng = Rng::stream(31, Rng::Purpose::kGeneric);
  const auto big = ConnectomeSample::from_connectomes(random_points(30, 4, 100, rng), airm_metric());
  CHECK(big.size() == 30);
  CHECK(big.coord_dim() == 10);
}

TEST_CASE("tangent, vector and manifold conversions") {
  auto trivial = ConnectomeSample::from_connectomes({SpdMatrix::identity(2)}, airm_metric());
  trivial.compute_tangents();
  CHECK(frobenius_norm(trivial.tangent_images()[0]) == 0.0);

  auto simple = ConnectomeSample::from_connectomes({diag_spd({std::numbers::e, 1.0})}, airm_metric());
  simple.compute_tangents(SpdMatrix::identity(2));
  CHECK(rel_err(simple.tangent_images()[0], SymMatrix::from_packed(2, {1, 0, 0})) < 1e-14);

  Rng rng = Rng::stream(32, Rng::Purpose::kGeneric);
  for (const auto* m : {&airm_metric(), &log_euclidean_metric(), &log_cholesky_metric(),
                        &bures_wasserstein_metric()}) {
    CAPTURE(m->name);
    const auto original = random_points(8, 4, 100, rng);
    auto s = ConnectomeSample::from_connectomes(original, *m);
    CHECK_THROWS_AS(s.compute_vecs(), StateError);
    CHECK_THROWS_AS(s.compute_unvec(), StateError);
    s.compute_tangents(random_spd(4, 10, rng));
    check_consistent(s);
    s.compute_vecs();
    check_consistent(s);

    const auto tangents = s.tangent_images();
    s.compute_unvec();
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(rel_err(s.tangent_images()[i], tangents[i]) < 1e-12);
    s.compute_conns();
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(rel_err(s.connectomes()[i], original[i]) < 1e-8);
  }
}

TEST_CASE("relocate keeps the represented points") {
  Rng rng = Rng::stream(33, Rng::Purpose::kGeneric);
  for (const auto* m : {&airm_metric(), &log_euclidean_metric(), &log_cholesky_metric(),
                        &bures_wasserstein_metric()}) {
    CAPTURE(m->name);
    const auto original = random_points(6, 3, 50, rng);
    const auto ref0 = random_spd(3, 10, rng);
    std::vector<SymMatrix> tangents;
    for (const auto& x : original) tangents.push_back(m->log(ref0, x));
    auto s = ConnectomeSample::from_tangents(tangents, ref0, *m);
    CHECK_THROWS_AS(s.compute_tangents(), StateError);

    s.relocate(ref0);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(rel_err(s.tangent_images()[i], tangents[i]) < 1e-8);

    s.compute_vecs();
    s.relocate(random_spd(3, 10, rng));
    check_consistent(s);
    const auto points = s.manifold_points();
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(rel_err(points[i], original[i]) < 1e-8);
  }
  auto no_tangents = ConnectomeSample::from_connectomes({SpdMatrix::identity(2)}, airm_metric());
  CHECK_THROWS_AS(no_tangents.relocate(SpdMatrix::identity(2)), StateError);
}

TEST_CASE("Fréchet mean closed forms") {
  Rng rng = Rng::stream(34, Rng::Purpose::kGeneric);

  SUBCASE("two copies") {
    const auto a = random_spd(4, 100, rng);
    auto s = ConnectomeSample::from_connectomes({a, a}, airm_metric());
    const auto& r = s.compute_frechet_mean(unit_step());
    CHECK(rel_err(r.mean, a) < 1e-10);
    CHECK(r.converged);
  }
  SUBCASE("airm midpoint of a matrix and its inverse") {
    const auto sigma = random_spd(4, 100, rng);
    const auto inv = spd(sigma.dense().inverse());
    auto s = ConnectomeSample::from_connectomes({sigma, inv}, airm_metric());
    const auto& r = s.compute_frechet_mean();
    CHECK(rel_err(r.mean.dense(), Matrix::Identity(4, 4)) < FrechetConfig{}.tolerance);
    CHECK(rel_err(r.mean.dense(), Matrix::Identity(4, 4)) < 1e-10);
    // the Riemannian gradient vanishes at I
    const auto frame = airm_metric().at(r.mean);
    CHECK(frobenius_norm(frame.log(sigma) + frame.log(inv)) < 1e-10);
  }
  SUBCASE("euclidean mean is the arithmetic mean after one unit epoch") {
    const auto pts = random_points(12, 5, 100, rng);
    Matrix avg = Matrix::Zero(5, 5);
    for (const auto& x : pts) avg += x.dense() / 12.0;
    FrechetConfig c;
    c.learning_rate = 1.0;
    const auto r = frechet_mean(pts, euclidean_metric(), c, SpdMatrix::identity(5));
    CHECK(rel_err(r.mean.dense(), avg) < 1e-10);
    CHECK(r.epochs == 2);
  }
  SUBCASE("log-euclidean mean is expm of the mean logm") {
    const auto pts = random_points(10, 4, 1e3, rng);
    SymMatrix acc(4);
    for (const auto& x : pts) acc += matrix_log_spd(x);
    const auto want = matrix_exp_sym(acc * 0.1);
    const auto r = frechet_mean(pts, log_euclidean_metric(), unit_step(), random_spd(4, 10, rng));
    CHECK(rel_err(r.mean, want) < 1e-6);
  }
}

TEST_CASE("Fréchet mean defaults, batching and stopping rule") {
  Rng rng = Rng::stream(35, Rng::Purpose::kGeneric);
  const FrechetConfig defaults;
  CHECK(defaults.learning_rate == 0.2);
  CHECK(defaults.tolerance == 0.05);
  CHECK(defaults.max_iterations == 20);
  CHECK_FALSE(defaults.batch_size);

  auto s = rspdnorm(60, spd(1.5 * Matrix::Identity(3, 3)), Matrix::Identity(6, 6), airm_metric(), 7);
  const auto pts = s.manifold_points();
  const auto r = frechet_mean(pts, airm_metric(), defaults, SpdMatrix::identity(3));
  CHECK((r.converged || r.epochs == 20));
  CHECK(r.final_delta < 0.05);

  // one more full-batch step moves the estimate by less than the tolerance
  FrechetConfig one = defaults;
  one.max_iterations = 1;
  const auto next = frechet_mean(pts, airm_metric(), one, r.mean);
  CHECK(next.final_delta < defaults.tolerance);

  FrechetConfig mini = defaults;
  mini.batch_size = 16;  // last batch has 12 points
  mini.max_iterations = 3;
  const auto rm = frechet_mean(pts, airm_metric(), mini, SpdMatrix::identity(3));
  CHECK(rm.epochs >= 1);

  FrechetConfig bad = defaults;
  bad.batch_size = 61;
  CHECK_THROWS_AS(frechet_mean(pts, airm_metric(), bad, SpdMatrix::identity(3)),
                  std::invalid_argument);
  bad = defaults;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(frechet_mean(pts, airm_metric(), bad, SpdMatrix::identity(3)),
                  std::invalid_argument);
}

TEST_CASE("Fréchet mean is bit-identical across thread counts") {
  Rng rng = Rng::stream(36, Rng::Purpose::kGeneric);
  const auto pts = random_points(40, 6, 100, rng);
  FrechetConfig c;
  c.batch_size = 7;
  c.seed = 99;
  std::vector<Matrix> results;
  for (std::size_t threads : {1, 2, 8}) {
    parallel::ScopedThreads scoped(threads);
    results.push_back(frechet_mean(pts, airm_metric(), c, SpdMatrix::identity(6)).mean.dense());
  }
  CHECK(results[0] == results[1]);
  CHECK(results[0] == results[2]);
  c.seed = 100;
  CHECK_FALSE(frechet_mean(pts, airm_metric(), c, SpdMatrix::identity(6)).mean.dense() == results[0]);
}

TEST_CASE("center") {
  Rng rng = Rng::stream(37, Rng::Purpose::kGeneric);
  auto s = rspdnorm(40, spd(2.0 * Matrix::Identity(4, 4)), Matrix::Identity(10, 10), airm_metric(), 3);
  CHECK_FALSE(s.is_centered());
  s.compute_unvec();
  s.compute_conns();
  s.compute_frechet_mean();
  s.center();
  CHECK(s.is_centered());
  s.compute_vecs();
  const Vector bar = s.vector_images().colwise().mean();
  CHECK(bar.norm() <= s.centering_tolerance());
  CHECK(bar.norm() > 0.0);

  const auto mean = *s.frechet_mean();
  const auto tangents = s.tangent_images();
  s.center();
  CHECK(rel_err(*s.frechet_mean(), mean) < 1e-12);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(rel_err(s.tangent_images()[i], tangents[i]) < 1e-10);

  s.relocate(SpdMatrix::identity(4));
  CHECK_FALSE(s.is_centered());

  const auto a = random_spd(3, 10, rng);
  auto single = ConnectomeSample::from_connectomes({a}, log_cholesky_metric());
  single.center();
  CHECK(rel_err(*single.frechet_mean(), a) < 1e-8);
  CHECK(frobenius_norm(single.tangent_images()[0]) < 1e-8);
}

TEST_CASE("variation") {
  Rng rng = Rng::stream(38, Rng::Purpose::kGeneric);
  const auto a = random_spd(3, 10, rng);
  auto same = ConnectomeSample::from_connectomes({a, a}, airm_metric());
  CHECK_THROWS_AS(same.compute_variation(), StateError);
  same.compute_frechet_mean(unit_step());
  CHECK(same.compute_variation() < 1e-18);

  const double e = std::numbers::e;
  auto pair = ConnectomeSample::from_connectomes({diag_spd({e, e}), diag_spd({1 / e, 1 / e})},
                                                 airm_metric());
  pair.compute_frechet_mean();
  CHECK(pair.compute_variation() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("sample covariance") {
  Matrix same(2, 3);
  same << 1, 2, 3, 1, 2, 3;
  auto s = ConnectomeSample::from_vectors(same, SpdMatrix::identity(2), euclidean_metric());
  CHECK(s.compute_sample_cov().norm() == 0.0);

  auto one = ConnectomeSample::from_vectors(Matrix::Ones(1, 3), SpdMatrix::identity(2),
                                            euclidean_metric());
  CHECK_THROWS_AS(one.compute_sample_cov(), StateError);

  Rng rng = Rng::stream(39, Rng::Purpose::kGeneric);
  const Matrix v = gaussian_matrix(25, 6, rng);
  auto r = ConnectomeSample::from_vectors(v, SpdMatrix::identity(3), airm_metric());
  const Matrix& cov = r.compute_sample_cov();
  // naive two-pass oracle
  Vector mean = Vector::Zero(6);
  for (Eigen::Index i = 0; i < 25; ++i) mean += v.row(i).transpose();
  mean /= 25.0;
  Matrix naive = Matrix::Zero(6, 6);
  for (Eigen::Index i = 0; i < 25; ++i) {
    const Vector dv = v.row(i).transpose() - mean;
    for (Eigen::Index a = 0; a < 6; ++a)
      for (Eigen::Index b = 0; b < 6; ++b) naive(a, b) += dv(a) * dv(b) / 24.0;
  }
  CHECK((cov - naive).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);

  auto none = ConnectomeSample::from_connectomes({SpdMatrix::identity(2)}, airm_metric());
  CHECK_THROWS_AS(none.compute_sample_cov(), StateError);
}

TEST_CASE("rspdnorm") {
  const auto id30 = SpdMatrix::identity(30);
  CHECK_THROWS_AS(rspdnorm(5, id30, Matrix::Identity(464, 464), airm_metric(), 1), ShapeError);
  auto s = rspdnorm(5, id30, Matrix::Identity(465, 465), airm_metric(), 1);
  CHECK(s.coord_dim() == 465);
  CHECK(s.has_vectors());
  CHECK_FALSE(s.has_tangents());
  CHECK_FALSE(s.has_connectomes());
  CHECK_FALSE(s.is_centered());

  Matrix not_spd = Matrix::Identity(6, 6);
  not_spd(0, 0) = -1;
  CHECK_THROWS_AS(rspdnorm(5, SpdMatrix::identity(3), not_spd, airm_metric(), 1), DomainError);

  const auto a = rspdnorm(10, SpdMatrix::identity(3), Matrix::Identity(6, 6), airm_metric(), 42);
  const auto b = rspdnorm(10, SpdMatrix::identity(3), Matrix::Identity(6, 6), airm_metric(), 42);
  CHECK(a.vector_images() == b.vector_images());

  for (std::size_t p : {2, 3, 4}) {
    const auto d = static_cast<Eigen::Index>(manifold_dim(p));
    auto big = rspdnorm(5000, SpdMatrix::identity(p), Matrix::Identity(d, d), airm_metric(), 5);
    const Matrix err = big.compute_sample_cov() - Matrix::Identity(d, d);
    Eigen::SelfAdjointEigenSolver<Matrix> es(err);
    CHECK(es.eigenvalues().cwiseAbs().maxCoeff() < 0.1);
  }
}

TEST_CASE("random operation sequences keep the representations consistent") {
  Rng rng = Rng::stream(40, Rng::Purpose::kGeneric);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = ConnectomeSample::from_connectomes(random_points(5, 3, 50, rng), airm_metric());
    s.compute_tangents();
    for (int step = 0; step < 8; ++step) {
      switch (rng.below(5)) {
        case 0: s.relocate(random_spd(3, 10, rng)); break;
        case 1: s.compute_vecs(); break;
        case 2: if (s.has_vectors()) s.compute_unvec(); break;
        case 3: s.compute_conns(); break;
        default: s.center(); break;
      }
      check_consistent(s);
    }
  }
}
