#include "spdstats/supersample.hpp"

#include "spdstats/error.hpp"

#include <cmath>
#include <string>

namespace spdstats {

SuperSample::SuperSample(std::vector<ConnectomeSample> groups, const MetricDescriptor& metric)
    : metric_(metric), groups_(std::move(groups)) {
  if (groups_.empty()) throw ShapeError("a super sample needs at least one group");
  p_ = groups_.front().matrix_dim();
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    const auto& g = groups_[j];
    if (g.metric().name != metric_.name) {
      throw ShapeError("group " + std::to_string(j) + " uses metric '" + g.metric().name +
                       "', expected '" + metric_.name + "'");
    }
    if (g.matrix_dim() != p_) {
      throw ShapeError("group " + std::to_string(j) + " holds " + std::to_string(g.matrix_dim()) +
                       "x" + std::to_string(g.matrix_dim()) + " matrices, expected " +
                       std::to_string(p_) + "x" + std::to_string(p_));
    }
    total_ += g.size();
  }
}

namespace {

MetricDescriptor first_metric(const std::vector<ConnectomeSample>& groups) {
  if (groups.empty()) throw ShapeError("a super sample needs at least one group");
  return groups.front().metric();
}

}  // namespace

SuperSample::SuperSample(std::vector<ConnectomeSample> groups)
    : SuperSample(groups, first_metric(groups)) {}

const ConnectomeSample& SuperSample::group(std::size_t j) const { return groups_.at(j); }

std::vector<std::size_t> SuperSample::group_sizes() const {
  std::vector<std::size_t> sizes;
  for (const auto& g : groups_) sizes.push_back(g.size());
  return sizes;
}

void SuperSample::set_group(std::size_t j, ConnectomeSample sample) {
  if (j >= groups_.size()) throw ShapeError("group index out of range");
  if (sample.metric().name != metric_.name || sample.matrix_dim() != p_) {
    throw ShapeError("replacement group does not match the super sample's metric or size");
  }
  total_ = total_ - groups_[j].size() + sample.size();
  groups_[j] = std::move(sample);
  invalidate();
}

void SuperSample::invalidate() {
  pooled_.reset();
  grand_mean_.reset();
  total_variation_.reset();
  scatters_.reset();
  stacked_.reset();
}

void SuperSample::gather() {
  std::vector<SpdMatrix> all;
  all.reserve(total_);
  for (const auto& g : groups_) {
    auto points = g.manifold_points();
    for (auto& x : points) all.push_back(std::move(x));
  }
  pooled_ = ConnectomeSample::from_connectomes(std::move(all), metric_);
  grand_mean_.reset();
  total_variation_.reset();
  scatters_.reset();
  stacked_.reset();
}

const FrechetResult& SuperSample::compute_grand_mean(const FrechetConfig& config) {
  if (!pooled_) gather();
  grand_mean_ = pooled_->compute_frechet_mean(config);
  total_variation_.reset();
  scatters_.reset();
  stacked_.reset();
  return *grand_mean_;
}

double SuperSample::compute_total_variation() {
  if (!grand_mean_) throw StateError("compute_total_variation needs the grand mean");
  total_variation_ = pooled_->compute_variation();
  return *total_variation_;
}

std::optional<SpdMatrix> SuperSample::grand_mean() const {
  if (!grand_mean_) return std::nullopt;
  return grand_mean_->mean;
}

const Scatters& SuperSample::compute_scatters() {
  if (!grand_mean_) throw StateError("compute_scatters needs the grand mean");
  const SpdMatrix& mu = grand_mean_->mean;
  Matrix stacked(static_cast<Eigen::Index>(total_), static_cast<Eigen::Index>(coord_dim()));
  Eigen::Index row = 0;
  for (auto& g : groups_) {
    g.express_at(mu);
    const Matrix& v = g.vector_images();
    stacked.middleRows(row, v.rows()) = v;
    row += v.rows();
  }
  scatters_ = scatter_matrices(stacked, labels(), groups_.size());
  stacked_ = std::move(stacked);
  return *scatters_;
}

const Matrix& SuperSample::stacked_vectors() const {
  if (!stacked_) throw StateError("stacked vectors need compute_scatters()");
  return *stacked_;
}

std::vector<std::size_t> SuperSample::labels() const {
  std::vector<std::size_t> out;
  out.reserve(total_);
  for (std::size_t j = 0; j < groups_.size(); ++j) out.insert(out.end(), groups_[j].size(), j);
  return out;
}

Scatters scatter_matrices(const Matrix& vectors, const std::vector<std::size_t>& labels,
                          std::size_t num_groups) {
  if (static_cast<std::size_t>(vectors.rows()) != labels.size()) {
    throw ShapeError("one label per row is required");
  }
  const Eigen::Index d = vectors.cols();
  const auto k = static_cast<Eigen::Index>(num_groups);
  Matrix sums = Matrix::Zero(k, d);
  Vector counts = Vector::Zero(k);
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    const auto j = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    if (j >= k) throw ShapeError("label out of range");
    sums.row(j) += vectors.row(i);
    counts(j) += 1.0;
  }
  const Vector grand = vectors.colwise().mean().transpose();
  Matrix means = sums;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (counts(j) > 0) means.row(j) /= counts(j);
  }

  Matrix resid(vectors.rows(), d);
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    resid.row(i) = vectors.row(i) - means.row(static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]));
  }
  Matrix dev(k, d);
  for (Eigen::Index j = 0; j < k; ++j) dev.row(j) = std::sqrt(counts(j)) * (means.row(j) - grand.transpose());
  const Matrix centered = vectors.rowwise() - grand.transpose();

  const auto gram = [](const Matrix& x) {
    Matrix g = x.transpose() * x;
    return Matrix(0.5 * (g + g.transpose()));
  };
  return Scatters{gram(resid), gram(dev), gram(centered)};
}

}  // namespace spdstats
