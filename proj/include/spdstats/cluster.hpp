#pragma once

#include "spdstats/spd_core.hpp"

#include <span>

namespace spdstats {

// Cluster-quality indices over the rows of `vectors` with Euclidean
// distances. Labels are arbitrary integers; each distinct value is a cluster.

/// Mean over points of (b - a) / max(a, b). A point alone in its cluster
/// scores 0, as does a point with a = b = 0.
double silhouette_score(const Matrix& vectors, std::span<const long> labels);

/// [tr(B) / (k - 1)] / [tr(W) / (n - k)]. 0 when both traces vanish,
/// +inf when only tr(W) does.
double calinski_harabasz(const Matrix& vectors, std::span<const long> labels);

/// Mean over clusters of max_j (s_i + s_j) / d_ij, where s is the mean
/// distance to the centroid. Pairs with coincident centroids contribute 0.
double davies_bouldin(const Matrix& vectors, std::span<const long> labels);

}  // namespace spdstats
