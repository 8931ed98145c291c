#pragma once

#include "spdstats/spd_core.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace spdstats {

/// The four metric maps bound to one reference point. Binding once and
/// mapping many points amortizes the reference's factorizations.
struct TangentFrame {
  std::function<SymMatrix(const SpdMatrix& point)> log;
  std::function<SpdMatrix(const SymMatrix& tangent)> exp;
  std::function<Vector(const SymMatrix& tangent)> vec;
  std::function<SymMatrix(const Vector& coords)> unvec;
};

/// A Riemannian metric on SPD_p described purely as data: a factory that
/// binds its maps to a reference point, plus optional parallel transport.
/// `vec` must be a linear isometry onto R^{p(p+1)/2}, so norms and distances
/// need no separate hook.
struct MetricDescriptor {
  using Transport =
      std::function<SymMatrix(const SpdMatrix& from, const SpdMatrix& to, const SymMatrix& v)>;

  std::string name;
  std::function<TangentFrame(const SpdMatrix& ref)> at;
  Transport transport;

  bool supports_transport() const noexcept { return static_cast<bool>(transport); }

  SymMatrix log(const SpdMatrix& ref, const SpdMatrix& point) const { return at(ref).log(point); }
  SpdMatrix exp(const SpdMatrix& ref, const SymMatrix& tangent) const {
    return at(ref).exp(tangent);
  }
  Vector vec(const SpdMatrix& ref, const SymMatrix& tangent) const {
    return at(ref).vec(tangent);
  }
  SymMatrix unvec(const SpdMatrix& ref, const Vector& coords) const {
    return at(ref).unvec(coords);
  }
};

/// Names accepted on the command line.
inline constexpr std::string_view kMetricNames[] = {"euclidean", "airm", "log-euclidean",
                                                    "log-cholesky", "bures-wasserstein"};

const MetricDescriptor& euclidean_metric();
const MetricDescriptor& airm_metric();
const MetricDescriptor& log_euclidean_metric();
const MetricDescriptor& log_cholesky_metric();
const MetricDescriptor& bures_wasserstein_metric();

/// Looks a built-in metric up by name; underscores and hyphens are
/// interchangeable. Throws UnsupportedMetric for unknown names.
const MetricDescriptor& metric_by_name(std::string_view name);

/// Builds a descriptor from four plain reference-taking maps.
MetricDescriptor make_metric(
    std::string name, std::function<SymMatrix(const SpdMatrix&, const SpdMatrix&)> log,
    std::function<SpdMatrix(const SpdMatrix&, const SymMatrix&)> exp,
    std::function<Vector(const SpdMatrix&, const SymMatrix&)> vec,
    std::function<SymMatrix(const SpdMatrix&, const Vector&)> unvec,
    MetricDescriptor::Transport transport = {});

/// Geodesic distance ||vec(A, log(A, B))||_2.
double distance(const MetricDescriptor& metric, const SpdMatrix& a, const SpdMatrix& b);

/// Throws UnsupportedMetric when the metric has no transport.
SymMatrix parallel_transport(const MetricDescriptor& metric, const SpdMatrix& from,
                             const SpdMatrix& to, const SymMatrix& v);

/// Symmetric tangent vector tied to the point whose tangent space it lives in.
struct TangentImage {
  SymMatrix vector;
  SpdMatrix reference;
};

/// Orthonormal triangle coordinates of a symmetric matrix: upper triangle in
/// row-major order, off-diagonal entries scaled by sqrt(2).
Vector triangle_coords(const Matrix& symmetric);
Matrix from_triangle_coords(const Vector& coords, std::size_t p);

/// Matrix dimension p for a coordinate count p(p+1)/2; throws ShapeError otherwise.
std::size_t dim_from_coords(std::size_t d);

}  // namespace spdstats
