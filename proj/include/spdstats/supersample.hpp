#pragma once

#include "spdstats/sample.hpp"

#include <optional>
#include <string>
#include <vector>

namespace spdstats {

/// Raw sums of squares in vectorized coordinates at the grand mean:
/// total = within + between.
struct Scatters {
  Matrix within;
  Matrix between;
  Matrix total;
};

/// Several ConnectomeSamples sharing one metric and matrix size, with the
/// pooled sample and the aggregates the group tests consume.
class SuperSample {
 public:
  /// Throws ShapeError if a group uses another metric or matrix size.
  SuperSample(std::vector<ConnectomeSample> groups, const MetricDescriptor& metric);
  /// Takes the metric from the first group.
  explicit SuperSample(std::vector<ConnectomeSample> groups);

  std::size_t num_groups() const noexcept { return groups_.size(); }
  /// Total number of matrices over all groups.
  std::size_t size() const noexcept { return total_; }
  std::size_t matrix_dim() const noexcept { return p_; }
  std::size_t coord_dim() const noexcept { return manifold_dim(p_); }
  const MetricDescriptor& metric() const noexcept { return metric_; }

  const std::vector<ConnectomeSample>& groups() const noexcept { return groups_; }
  const ConnectomeSample& group(std::size_t j) const;
  std::vector<std::size_t> group_sizes() const;
  /// Replaces a group and drops every aggregate.
  void set_group(std::size_t j, ConnectomeSample sample);

  /// Concatenates all groups' matrices, in group order, into `pooled`.
  void gather();
  const std::optional<ConnectomeSample>& pooled() const noexcept { return pooled_; }

  /// Fréchet mean of the pooled sample (gathering first if needed).
  const FrechetResult& compute_grand_mean(const FrechetConfig& config = FrechetConfig::precise());
  /// Pooled variation about the grand mean.
  double compute_total_variation();
  /// Expresses every group at the grand mean, then forms W, B and T.
  const Scatters& compute_scatters();

  std::optional<SpdMatrix> grand_mean() const;
  std::optional<double> total_variation() const noexcept { return total_variation_; }
  const std::optional<Scatters>& scatters() const noexcept { return scatters_; }

  /// All groups' vector images at the grand mean stacked in group order;
  /// available after compute_scatters().
  const Matrix& stacked_vectors() const;
  /// Group index of each row of stacked_vectors().
  std::vector<std::size_t> labels() const;

 private:
  void invalidate();

  MetricDescriptor metric_;
  std::vector<ConnectomeSample> groups_;
  std::size_t p_ = 0;
  std::size_t total_ = 0;

  std::optional<ConnectomeSample> pooled_;
  std::optional<FrechetResult> grand_mean_;
  std::optional<double> total_variation_;
  std::optional<Scatters> scatters_;
  std::optional<Matrix> stacked_;
};

/// Within, between and total scatter of labelled rows.
Scatters scatter_matrices(const Matrix& vectors, const std::vector<std::size_t>& labels,
                          std::size_t num_groups);

}  // namespace spdstats
