#pragma once

#include "spdstats/supersample.hpp"

#include <vector>

namespace spdstats {

/// Fitted location/scale model, one row per site and one column per
/// tangent coordinate.
struct CombatModel {
  Vector grand_location;  // alpha_g
  Vector pooled_scale;    // sigma_g
  Matrix gamma_hat;
  Matrix delta2_hat;
  Matrix gamma_star;
  Matrix delta2_star;
  // Prior hyperparameters per site: gamma ~ N(gamma_bar, tau2),
  // delta2 ~ InvGamma(a_prior, b_prior).
  Vector gamma_bar;
  Vector tau2;
  Vector a_prior;
  Vector b_prior;
  /// Coordinates with no within-site spread; copied through untouched.
  std::vector<std::size_t> constant_features;
  /// Largest number of shrinkage iterations over the sites.
  std::size_t iterations = 0;
};

struct CombatResult {
  SuperSample harmonized;
  CombatModel model;
};

/// Parametric empirical-Bayes ComBat on the tangent vectors at the grand
/// Fréchet mean, one site per group. Output matrices are mapped back to the
/// manifold and validated; a DomainError lists any that leave the cone.
CombatResult combat_harmonization(SuperSample& ss,
                                  const FrechetConfig& config = FrechetConfig::precise());

/// Site-wise transport of tangents from the site mean to the grand mean.
/// Throws UnsupportedMetric for metrics without parallel transport.
SuperSample rigid_harmonization(SuperSample& ss,
                                const FrechetConfig& config = FrechetConfig::precise());

}  // namespace spdstats
