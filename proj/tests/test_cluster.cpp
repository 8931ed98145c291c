#include "spdstats/cluster.hpp"
#include "spdstats/error.hpp"
#include "support/cluster_oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace spdstats;
using namespace spdstats::testing;

TEST_CASE("indices match their definitions on random instances") {
  Rng rng = Rng::stream(70, Rng::Purpose::kGeneric);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_instance(rng);
    CAPTURE(trial);
    const double s = silhouette_score(in.x, in.labels);
    CHECK(std::abs(s - silhouette_oracle(in)) < 1e-10);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    const double ch = calinski_harabasz(in.x, in.labels);
    CHECK(std::abs(ch - ch_oracle(in)) < 1e-10 * std::max(1.0, ch));
    CHECK(ch >= 0.0);
    const double db = davies_bouldin(in.x, in.labels);
    CHECK(std::abs(db - db_oracle(in)) < 1e-10 * std::max(1.0, db));
    CHECK(db >= 0.0);
  }
}

TEST_CASE("well separated clusters") {
  Rng rng = Rng::stream(71, Rng::Purpose::kGeneric);
  Matrix x = 1e-3 * gaussian_matrix(20, 3, rng);
  std::vector<long> labels(20, 0);
  for (Eigen::Index i = 10; i < 20; ++i) {
    x.row(i).array() += 100.0;
    labels[static_cast<std::size_t>(i)] = 1;
  }
  CHECK(silhouette_score(x, labels) > 0.999);
  CHECK(davies_bouldin(x, labels) < 1e-3);
  CHECK(calinski_harabasz(x, labels) > 1e6);
}

TEST_CASE("degenerate conventions") {
  const Matrix same = Matrix::Ones(6, 2);
  const std::vector<long> two = {0, 0, 0, 1, 1, 1};
  CHECK(calinski_harabasz(same, two) == 0.0);
  CHECK(davies_bouldin(same, two) == 0.0);
  CHECK(silhouette_score(same, two) == 0.0);

  Matrix split = Matrix::Zero(6, 2);
  split.bottomRows(3).array() = 1.0;
  CHECK(std::isinf(calinski_harabasz(split, two)));
  CHECK(davies_bouldin(split, two) == 0.0);

  Matrix x(4, 1);
  x << 0, 1, 2, 10;
  const std::vector<long> singleton = {0, 0, 0, 1};
  // the lone point contributes 0; the others use b from the singleton
  const double want = ((10.0 - 1.5) / 10.0 + (9.0 - 1.0) / 9.0 + (8.0 - 1.5) / 8.0) / 4.0;
  CHECK(silhouette_score(x, singleton) == doctest::Approx(want).epsilon(1e-14));

  CHECK_THROWS_AS(silhouette_score(x, std::vector<long>{0, 0, 0, 0}), ShapeError);
  CHECK_THROWS_AS(silhouette_score(x, std::vector<long>{0, 1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(davies_bouldin(x, std::vector<long>{0, 1}), ShapeError);
}
