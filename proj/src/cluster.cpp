#include "spdstats/cluster.hpp"

#include "spdstats/error.hpp"
#include "spdstats/parallel.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace spdstats {

namespace {

struct Clustering {
  std::vector<std::size_t> index;  // dense cluster id per row
  std::vector<double> counts;
  std::size_t k = 0;
};

Clustering encode(const Matrix& vectors, std::span<const long> labels, const char* who) {
  if (static_cast<std::size_t>(vectors.rows()) != labels.size()) {
    throw ShapeError(std::string(who) + ": " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(vectors.rows()) + " rows");
  }
  std::map<long, std::size_t> ids;
  for (long l : labels) ids.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [label, id] : ids) id = next++;
  Clustering c;
  c.k = ids.size();
  c.counts.assign(c.k, 0.0);
  for (long l : labels) {
    c.index.push_back(ids[l]);
    c.counts[ids[l]] += 1.0;
  }
  if (c.k < 2) throw ShapeError(std::string(who) + " needs at least two clusters");
  return c;
}

Matrix centroids(const Matrix& vectors, const Clustering& c) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(c.k), vectors.cols());
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    m.row(static_cast<Eigen::Index>(c.index[static_cast<std::size_t>(i)])) += vectors.row(i);
  }
  for (std::size_t j = 0; j < c.k; ++j) m.row(static_cast<Eigen::Index>(j)) /= c.counts[j];
  return m;
}

}  // namespace

double silhouette_score(const Matrix& vectors, std::span<const long> labels) {
  const auto c = encode(vectors, labels, "silhouette_score");
  const auto n = static_cast<std::size_t>(vectors.rows());
  if (c.k > n - 1) throw ShapeError("silhouette_score needs fewer clusters than points");

  const auto scores = parallel::map<double>(n, [&](std::size_t i) {
    const std::size_t own = c.index[i];
    if (c.counts[own] < 2) return 0.0;
    std::vector<double> sums(c.k, 0.0);
    const auto row = vectors.row(static_cast<Eigen::Index>(i));
    for (std::size_t q = 0; q < n; ++q) {
      if (q == i) continue;
      sums[c.index[q]] += (vectors.row(static_cast<Eigen::Index>(q)) - row).norm();
    }
    const double a = sums[own] / (c.counts[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c.k; ++j) {
      if (j != own) b = std::min(b, sums[j] / c.counts[j]);
    }
    const double denom = std::max(a, b);
    return denom > 0.0 ? (b - a) / denom : 0.0;
  });
  double total = 0.0;
  for (double s : scores) total += s;
  return total / static_cast<double>(n);
}

double calinski_harabasz(const Matrix& vectors, std::span<const long> labels) {
  const auto c = encode(vectors, labels, "calinski_harabasz");
  const auto n = static_cast<std::size_t>(vectors.rows());
  if (n <= c.k) throw ShapeError("calinski_harabasz needs more points than clusters");
  const Matrix m = centroids(vectors, c);
  const Eigen::RowVectorXd grand = vectors.colwise().mean();
  double between = 0.0;
  for (std::size_t j = 0; j < c.k; ++j) {
    between += c.counts[j] * (m.row(static_cast<Eigen::Index>(j)) - grand).squaredNorm();
  }
  double within = 0.0;
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    within += (vectors.row(i) - m.row(static_cast<Eigen::Index>(c.index[static_cast<std::size_t>(i)])))
                  .squaredNorm();
  }
  if (within == 0.0) return between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (between / static_cast<double>(c.k - 1)) / (within / static_cast<double>(n - c.k));
}

double davies_bouldin(const Matrix& vectors, std::span<const long> labels) {
  const auto c = encode(vectors, labels, "davies_bouldin");
  const Matrix m = centroids(vectors, c);
  std::vector<double> spread(c.k, 0.0);
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    const std::size_t j = c.index[static_cast<std::size_t>(i)];
    spread[j] += (vectors.row(i) - m.row(static_cast<Eigen::Index>(j))).norm();
  }
  for (std::size_t j = 0; j < c.k; ++j) spread[j] /= c.counts[j];

  double total = 0.0;
  for (std::size_t i = 0; i < c.k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < c.k; ++j) {
      if (j == i) continue;
      const double dist = (m.row(static_cast<Eigen::Index>(i)) - m.row(static_cast<Eigen::Index>(j))).norm();
      const double ratio = dist > 0.0 ? (spread[i] + spread[j]) / dist : 0.0;
      worst = std::max(worst, ratio);
    }
    total += worst;
  }
  return total / static_cast<double>(c.k);
}

}  // namespace spdstats
