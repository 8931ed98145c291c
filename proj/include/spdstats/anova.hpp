#pragma once

#include "spdstats/supersample.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace spdstats {

struct FrechetAnovaResult {
  std::vector<double> group_variations;
  std::vector<SpdMatrix> group_means;
  /// Centered fourth moments sigma_j^2 of the squared distances.
  std::vector<double> group_sigma2;
  SpdMatrix pooled_mean;
  double pooled_variation = 0.0;
  double f_stat = 0.0;
  double u_stat = 0.0;
  double t_stat = 0.0;
  /// Upper tail of chi-square with k - 1 degrees of freedom at t_stat.
  std::optional<double> p_asymptotic = std::nullopt;
  double p_permutation = 1.0;
  std::size_t n_permutations = 0;
};

/// k-sample test of equal Fréchet means and variations. The null
/// distribution of T comes from relabelling the pooled points; every
/// relabelling recomputes the group means from the pooled mean.
FrechetAnovaResult frechet_anova(const SuperSample& ss, std::size_t n_permutations,
                                 std::uint64_t seed,
                                 const FrechetConfig& config = FrechetConfig::precise());

/// log det W - log det T from Cholesky factors. Needs compute_scatters().
double log_wilks_lambda(const SuperSample& ss);
/// trace(B T^{-1}). Needs compute_scatters().
double pillais_trace(const SuperSample& ss);
double log_wilks_lambda(const Scatters& s);
double pillais_trace(const Scatters& s);

enum class ManovaStat { kLogWilks, kPillai };

struct RiemAnovaOptions {
  ManovaStat stat = ManovaStat::kLogWilks;
  std::size_t n_iterations = 100;
  std::uint64_t seed = 0;
  /// Project onto this many leading principal axes of T before testing.
  std::optional<std::size_t> pca_dim;
  FrechetConfig grand_mean_config = FrechetConfig::precise();
};

struct RiemAnovaResult {
  ManovaStat stat = ManovaStat::kLogWilks;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n_iterations = 0;
  /// Coordinates used after any projection.
  std::size_t dim = 0;
};

/// Permutation MANOVA on the tangent vectors at the grand mean. The
/// vectorization is computed once; each permutation only regroups rows.
/// Smaller log Wilks and larger Pillai count as more extreme.
RiemAnovaResult riem_anova(SuperSample& ss, const RiemAnovaOptions& options = {});

/// Both statistics for labelled rows, via whitening by the total scatter.
/// Throws SingularScatterError when the data cannot support them.
struct ManovaPair {
  double log_wilks;
  double pillai;
};
ManovaPair manova_statistics(const Matrix& vectors, const std::vector<std::size_t>& labels,
                             std::size_t num_groups);

}  // namespace spdstats
