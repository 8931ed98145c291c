#pragma once

#include "spdstats/metrics.hpp"
#include "spdstats/spd_core.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace spdstats {

/// Mini-batch gradient descent settings for the Fréchet mean.
struct FrechetConfig {
  double learning_rate = 0.2;
  /// Stop once ||ref_end - ref_start||_F / ||ref_start||_F over an epoch drops below this.
  double tolerance = 0.05;
  std::size_t max_iterations = 20;
  /// Defaults to the sample size.
  std::optional<std::size_t> batch_size;
  std::uint64_t seed = 0;
  /// Full-batch steps only: Barzilai-Borwein step lengths capped at
  /// learning_rate, halved until the mean squared distance decreases.
  bool line_search = false;

  /// Throws std::invalid_argument when the settings are unusable for n points.
  void validate(std::size_t n) const;

  /// Full-batch unit steps with line search iterated to a tight tolerance.
  /// Used by the statistics routines, whose guarantees need near-exact
  /// minimizers.
  static FrechetConfig precise() {
    FrechetConfig c;
    c.learning_rate = 1.0;
    c.tolerance = 1e-9;
    c.max_iterations = 500;
    c.line_search = true;
    return c;
  }
};

struct FrechetResult {
  SpdMatrix mean;
  std::size_t epochs = 0;
  double final_delta = 0.0;
  bool converged = false;
};

/// Fréchet mean by shuffled mini-batch gradient steps
/// ref <- exp(ref, lr * mean(batch tangents at ref)), starting at `initial`.
/// Each epoch shuffles with Rng::stream(seed, kShuffle, epoch); batch sums
/// run in shuffled order, so the result is independent of the thread count.
FrechetResult frechet_mean(std::span<const SpdMatrix> points, const MetricDescriptor& metric,
                           const FrechetConfig& config, const SpdMatrix& initial);

/// One group of SPD matrices held in up to three synchronized
/// representations: manifold points, tangent images at a reference point,
/// and their vectorizations (rows of an n x d matrix). Statistics are
/// computed on request and cached.
class ConnectomeSample {
 public:
  static ConnectomeSample from_connectomes(std::vector<SpdMatrix> conns,
                                           const MetricDescriptor& metric);
  /// Validates each matrix; DomainError::index() names the first failure.
  static ConnectomeSample from_symmetric(const std::vector<SymMatrix>& mats,
                                         const MetricDescriptor& metric);
  static ConnectomeSample from_tangents(std::vector<SymMatrix> tangents, SpdMatrix reference,
                                        const MetricDescriptor& metric);
  static ConnectomeSample from_vectors(Matrix vectors, SpdMatrix reference,
                                       const MetricDescriptor& metric);

  std::size_t size() const noexcept { return n_; }
  std::size_t matrix_dim() const noexcept { return p_; }
  std::size_t coord_dim() const noexcept { return manifold_dim(p_); }
  const MetricDescriptor& metric() const noexcept { return metric_; }

  bool has_connectomes() const noexcept { return conns_.has_value(); }
  bool has_tangents() const noexcept { return tangents_.has_value(); }
  bool has_vectors() const noexcept { return vectors_.has_value(); }

  const std::vector<SpdMatrix>& connectomes() const;
  const std::vector<SymMatrix>& tangent_images() const;
  const Matrix& vector_images() const;
  /// Reference point shared by the tangent and vector representations.
  const std::optional<SpdMatrix>& reference() const noexcept { return reference_; }

  /// tangents = log(ref, conns[i]); ref defaults to the identity.
  void compute_tangents(std::optional<SpdMatrix> ref = std::nullopt);
  void compute_vecs();
  void compute_unvec();
  void compute_conns();
  /// Re-expresses the tangent images at a new reference point. The manifold
  /// points they represent do not move.
  void relocate(const SpdMatrix& new_ref);
  /// Makes tangent and vector images available at `ref`, from whichever
  /// representation exists.
  void express_at(const SpdMatrix& ref);

  const FrechetResult& compute_frechet_mean(const FrechetConfig& config = {});
  /// Relocates to the Fréchet mean (computing it with defaults if absent).
  /// If the mean of the vectorized tangents exceeds centering_tolerance(),
  /// the mean is first refined with FrechetConfig::precise().
  void center();
  double compute_variation();
  const Matrix& compute_sample_cov();

  const std::optional<FrechetResult>& frechet_result() const noexcept { return mean_; }
  std::optional<SpdMatrix> frechet_mean() const;
  std::optional<double> variation() const noexcept { return variation_; }
  const std::optional<Matrix>& sample_cov() const noexcept { return sample_cov_; }
  bool is_centered() const noexcept { return centered_; }
  double centering_tolerance() const noexcept;

  /// The manifold points, reconstructed from whichever representation exists.
  std::vector<SpdMatrix> manifold_points() const;
  /// Mean over rows of vec(reference, tangent_i); requires tangents or vectors.
  Vector mean_vector() const;

 private:
  ConnectomeSample(const MetricDescriptor& metric, std::size_t n, std::size_t p)
      : metric_(metric), n_(n), p_(p) {}

  void set_reference(SpdMatrix ref);
  void refresh_vectors_if_present();

  MetricDescriptor metric_;
  std::size_t n_;
  std::size_t p_;
  std::optional<std::vector<SpdMatrix>> conns_;
  std::optional<std::vector<SymMatrix>> tangents_;
  std::optional<Matrix> vectors_;
  std::optional<SpdMatrix> reference_;

  std::optional<FrechetResult> mean_;
  std::optional<double> variation_;
  std::optional<Matrix> sample_cov_;
  bool centered_ = false;
};

/// n i.i.d. vectors from N(0, dispersion) stored as vector images at `ref`.
/// dispersion must be d x d SPD with d = p(p+1)/2.
ConnectomeSample rspdnorm(std::size_t n, const SpdMatrix& ref, const Matrix& dispersion,
                          const MetricDescriptor& metric, std::uint64_t seed);

}  // namespace spdstats
