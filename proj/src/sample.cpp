#include "spdstats/sample.hpp"

#include "spdstats/error.hpp"
#include "spdstats/parallel.hpp"
#include "spdstats/random.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace spdstats {

namespace {

void require_present(bool present, const char* what) {
  if (!present) throw StateError(what);
}

}  // namespace

void FrechetConfig::validate(std::size_t n) const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("tolerance must be non-negative");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
  if (batch_size && (*batch_size < 1 || *batch_size > n)) {
    throw std::invalid_argument("batch size must lie in [1, " + std::to_string(n) + "]");
  }
  if (line_search && batch_size && *batch_size != n) {
    throw std::invalid_argument("line search needs full-batch steps");
  }
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 50;

struct Probe {
  TangentFrame frame;
  SymMatrix gradient;   // mean tangent
  Vector gradient_vec;  // its coordinates
  double half_energy;   // half the mean squared distance
  double gradient_sq;   // squared metric norm of the mean tangent
};

Probe probe(std::span<const SpdMatrix> points, const MetricDescriptor& metric, const SpdMatrix& at) {
  auto frame = metric.at(at);
  const auto tangents =
      parallel::map<SymMatrix>(points.size(), [&](std::size_t i) { return frame.log(points[i]); });
  const auto sq = parallel::map<double>(points.size(), [&](std::size_t i) {
    return frame.vec(tangents[i]).squaredNorm();
  });
  SymMatrix sum = tangents.front();
  double energy = sq.front();
  for (std::size_t i = 1; i < tangents.size(); ++i) {
    sum += tangents[i];
    energy += sq[i];
  }
  const double n = static_cast<double>(points.size());
  sum *= 1.0 / n;
  Vector coords = frame.vec(sum);
  const double g2 = coords.squaredNorm();
  return {std::move(frame), std::move(sum), std::move(coords), 0.5 * energy / n, g2};
}

FrechetResult frechet_mean_line_search(std::span<const SpdMatrix> points,
                                       const MetricDescriptor& metric,
                                       const FrechetConfig& config, const SpdMatrix& initial) {
  SpdMatrix ref = initial;
  Probe here = probe(points, metric, ref);
  double step = config.learning_rate;
  FrechetResult result{ref, 0, 0.0, false};
  for (std::size_t epoch = 0; epoch < config.max_iterations; ++epoch) {
    const Matrix start = ref.dense();
    result.epochs = epoch + 1;
    // Inside the quadratic regime the decrease drowns in rounding, so the
    // step is taken unchecked.
    const bool tiny = here.gradient_sq <= 1e-20 * std::max(here.half_energy, 1e-300);
    bool accepted = false;
    double next_step = step;
    for (int attempt = 0; attempt <= kMaxHalvings && !accepted; ++attempt) {
      std::optional<SpdMatrix> candidate;
      try {
        candidate.emplace(here.frame.exp(here.gradient * step));
      } catch (const DomainError&) {
        step *= 0.5;
        continue;
      }
      Probe there = probe(points, metric, *candidate);
      if (tiny || there.half_energy <= here.half_energy - kArmijo * step * here.gradient_sq) {
        // Barzilai-Borwein estimate of the next step, comparing gradient
        // coordinates across the two nearby reference points.
        const Vector move = step * here.gradient_vec;
        const double curvature = move.dot(here.gradient_vec - there.gradient_vec);
        next_step = curvature > 0.0 ? std::min(config.learning_rate, move.squaredNorm() / curvature)
                                    : config.learning_rate;
        ref = std::move(*candidate);
        here = std::move(there);
        accepted = true;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) {
      // no representable step lowers the energy: numerically at the minimum
      result.final_delta = 0.0;
      result.converged = true;
      break;
    }
    step = std::max(next_step, 1e-12 * config.learning_rate);
    result.final_delta = (ref.dense() - start).norm() / start.norm();
    if (result.final_delta < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.mean = std::move(ref);
  return result;
}

}  // namespace

FrechetResult frechet_mean(std::span<const SpdMatrix> points, const MetricDescriptor& metric,
                           const FrechetConfig& config, const SpdMatrix& initial) {
  const std::size_t n = points.size();
  if (n == 0) throw ShapeError("Fréchet mean of an empty sample");
  for (const auto& x : points) {
    if (x.dim() != initial.dim()) throw ShapeError("Fréchet mean: inconsistent dimensions");
  }
  config.validate(n);
  if (config.line_search) return frechet_mean_line_search(points, metric, config, initial);
  const std::size_t batch = config.batch_size.value_or(n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  SpdMatrix ref = initial;
  FrechetResult result{ref, 0, 0.0, false};
  for (std::size_t epoch = 0; epoch < config.max_iterations; ++epoch) {
    Rng rng = Rng::stream(config.seed, Rng::Purpose::kShuffle, epoch);
    rng.shuffle(std::span<std::size_t>(order));

    const Matrix start = ref.dense();
    for (std::size_t lo = 0; lo < n; lo += batch) {
      const std::size_t hi = std::min(n, lo + batch);
      const auto frame = metric.at(ref);
      // Only this batch's tangents at the current reference are ever read,
      // so they are computed on demand instead of relocating every point.
      const auto tangents = parallel::map<SymMatrix>(
          hi - lo, [&](std::size_t k) { return frame.log(points[order[lo + k]]); });
      SymMatrix gradient = tangents.front();
      for (std::size_t k = 1; k < tangents.size(); ++k) gradient += tangents[k];
      gradient *= config.learning_rate / static_cast<double>(hi - lo);
      ref = frame.exp(gradient);
    }

    result.epochs = epoch + 1;
    result.final_delta = (ref.dense() - start).norm() / start.norm();
    if (result.final_delta < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.mean = std::move(ref);
  return result;
}

ConnectomeSample ConnectomeSample::from_connectomes(std::vector<SpdMatrix> conns,
                                                    const MetricDescriptor& metric) {
  if (conns.empty()) throw ShapeError("a sample needs at least one connectome");
  const std::size_t p = conns.front().dim();
  for (std::size_t i = 0; i < conns.size(); ++i) {
    if (conns[i].dim() != p) {
      throw ShapeError("connectome " + std::to_string(i) + " has dimension " +
                       std::to_string(conns[i].dim()) + ", expected " + std::to_string(p));
    }
  }
  ConnectomeSample s(metric, conns.size(), p);
  s.conns_ = std::move(conns);
  return s;
}

ConnectomeSample ConnectomeSample::from_symmetric(const std::vector<SymMatrix>& mats,
                                                   const MetricDescriptor& metric) {
  std::vector<SpdMatrix> conns;
  conns.reserve(mats.size());
  for (std::size_t i = 0; i < mats.size(); ++i) {
    try {
      conns.push_back(validate_spd(mats[i]));
    } catch (const DomainError& e) {
      throw DomainError("connectome " + std::to_string(i) + ": " + e.what(), e.min_eigenvalue(),
                        static_cast<std::ptrdiff_t>(i));
    }
  }
  return from_connectomes(std::move(conns), metric);
}

ConnectomeSample ConnectomeSample::from_tangents(std::vector<SymMatrix> tangents,
                                                 SpdMatrix reference,
                                                 const MetricDescriptor& metric) {
  if (tangents.empty()) throw ShapeError("a sample needs at least one tangent image");
  const std::size_t p = reference.dim();
  for (const auto& t : tangents) {
    if (t.dim() != p) throw ShapeError("tangent image dimension does not match the reference");
  }
  ConnectomeSample s(metric, tangents.size(), p);
  s.tangents_ = std::move(tangents);
  s.reference_ = std::move(reference);
  return s;
}

ConnectomeSample ConnectomeSample::from_vectors(Matrix vectors, SpdMatrix reference,
                                                const MetricDescriptor& metric) {
  const std::size_t p = reference.dim();
  if (vectors.rows() == 0) throw ShapeError("a sample needs at least one vector image");
  if (static_cast<std::size_t>(vectors.cols()) != manifold_dim(p)) {
    throw ShapeError("vector images need " + std::to_string(manifold_dim(p)) +
                     " columns for " + std::to_string(p) + "x" + std::to_string(p) +
                     " matrices, got " + std::to_string(vectors.cols()));
  }
  ConnectomeSample s(metric, static_cast<std::size_t>(vectors.rows()), p);
  s.vectors_ = std::move(vectors);
  s.reference_ = std::move(reference);
  return s;
}

const std::vector<SpdMatrix>& ConnectomeSample::connectomes() const {
  require_present(conns_.has_value(), "connectomes have not been computed");
  return *conns_;
}

const std::vector<SymMatrix>& ConnectomeSample::tangent_images() const {
  require_present(tangents_.has_value(), "tangent images have not been computed");
  return *tangents_;
}

const Matrix& ConnectomeSample::vector_images() const {
  require_present(vectors_.has_value(), "vector images have not been computed");
  return *vectors_;
}

void ConnectomeSample::set_reference(SpdMatrix ref) {
  if (!reference_ || !(*reference_ == ref)) centered_ = false;
  reference_ = std::move(ref);
}

void ConnectomeSample::refresh_vectors_if_present() {
  if (vectors_) {
    vectors_.reset();
    compute_vecs();
  }
}

void ConnectomeSample::compute_tangents(std::optional<SpdMatrix> ref) {
  require_present(conns_.has_value(), "compute_tangents needs connectomes");
  SpdMatrix r = ref ? std::move(*ref) : SpdMatrix::identity(p_);
  if (r.dim() != p_) throw ShapeError("reference point dimension mismatch");
  const auto frame = metric_.at(r);
  const auto& conns = *conns_;
  tangents_ = parallel::map<SymMatrix>(n_, [&](std::size_t i) { return frame.log(conns[i]); });
  set_reference(std::move(r));
  refresh_vectors_if_present();
}

void ConnectomeSample::compute_vecs() {
  require_present(tangents_.has_value(), "compute_vecs needs tangent images");
  const auto frame = metric_.at(*reference_);
  const auto& tangents = *tangents_;
  Matrix v(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(coord_dim()));
  parallel::parallel_for(n_, [&](std::size_t i) {
    v.row(static_cast<Eigen::Index>(i)) = frame.vec(tangents[i]).transpose();
  });
  vectors_ = std::move(v);
  sample_cov_.reset();
}

void ConnectomeSample::compute_unvec() {
  require_present(vectors_.has_value(), "compute_unvec needs vector images");
  const auto frame = metric_.at(*reference_);
  const Matrix& v = *vectors_;
  tangents_ = parallel::map<SymMatrix>(n_, [&](std::size_t i) {
    return frame.unvec(v.row(static_cast<Eigen::Index>(i)).transpose());
  });
}

void ConnectomeSample::compute_conns() {
  require_present(tangents_.has_value(), "compute_conns needs tangent images");
  const auto frame = metric_.at(*reference_);
  const auto& tangents = *tangents_;
  std::vector<std::optional<SpdMatrix>> slots(n_);
  std::vector<std::string> failures(n_);
  parallel::parallel_for(n_, [&](std::size_t i) {
    try {
      slots[i].emplace(frame.exp(tangents[i]));
    } catch (const DomainError& e) {
      failures[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < n_; ++i) {
    if (!slots[i]) {
      throw DomainError("exp of tangent image " + std::to_string(i) +
                            " left the SPD cone: " + failures[i],
                        0.0, static_cast<std::ptrdiff_t>(i));
    }
  }
  std::vector<SpdMatrix> out;
  out.reserve(n_);
  for (auto& s : slots) out.push_back(std::move(*s));
  conns_ = std::move(out);
}

std::vector<SpdMatrix> ConnectomeSample::manifold_points() const {
  if (conns_) return *conns_;
  if (!tangents_ && !vectors_) throw StateError("sample has no representation");
  const auto frame = metric_.at(*reference_);
  if (tangents_) {
    const auto& t = *tangents_;
    return parallel::map<SpdMatrix>(n_, [&](std::size_t i) { return frame.exp(t[i]); });
  }
  const Matrix& v = *vectors_;
  return parallel::map<SpdMatrix>(n_, [&](std::size_t i) {
    return frame.exp(frame.unvec(v.row(static_cast<Eigen::Index>(i)).transpose()));
  });
}

void ConnectomeSample::relocate(const SpdMatrix& new_ref) {
  require_present(tangents_.has_value(), "relocate needs tangent images");
  if (new_ref.dim() != p_) throw ShapeError("reference point dimension mismatch");
  const auto target = metric_.at(new_ref);
  if (conns_) {
    const auto& conns = *conns_;
    tangents_ = parallel::map<SymMatrix>(n_, [&](std::size_t i) { return target.log(conns[i]); });
  } else {
    const auto source = metric_.at(*reference_);
    const auto& old = *tangents_;
    tangents_ = parallel::map<SymMatrix>(
        n_, [&](std::size_t i) { return target.log(source.exp(old[i])); });
  }
  set_reference(new_ref);
  refresh_vectors_if_present();
}

void ConnectomeSample::express_at(const SpdMatrix& ref) {
  if (!tangents_) {
    if (conns_) {
      compute_tangents(ref);
    } else {
      compute_unvec();
    }
  }
  if (!reference_ || !(*reference_ == ref)) relocate(ref);
  if (!vectors_) compute_vecs();
}

const FrechetResult& ConnectomeSample::compute_frechet_mean(const FrechetConfig& config) {
  const auto points = manifold_points();
  const SpdMatrix initial = reference_ ? *reference_ : SpdMatrix::identity(p_);
  mean_ = spdstats::frechet_mean(points, metric_, config, initial);
  variation_.reset();
  return *mean_;
}

std::optional<SpdMatrix> ConnectomeSample::frechet_mean() const {
  if (!mean_) return std::nullopt;
  return mean_->mean;
}

double ConnectomeSample::centering_tolerance() const noexcept {
  return 1e-3 * std::sqrt(static_cast<double>(coord_dim()));
}

Vector ConnectomeSample::mean_vector() const {
  if (vectors_) return vectors_->colwise().mean().transpose();
  require_present(tangents_.has_value(), "mean_vector needs tangent or vector images");
  const auto frame = metric_.at(*reference_);
  SymMatrix sum = (*tangents_)[0];
  for (std::size_t i = 1; i < n_; ++i) sum += (*tangents_)[i];
  sum *= 1.0 / static_cast<double>(n_);
  return frame.vec(sum);
}

void ConnectomeSample::center() {
  if (!mean_) compute_frechet_mean();
  SpdMatrix mean = mean_->mean;

  if (tangents_) {
    relocate(mean);
  } else if (conns_) {
    compute_tangents(mean);
  } else {
    compute_unvec();
    relocate(mean);
  }

  const double tol = centering_tolerance();
  if (mean_vector().norm() > tol) {
    const auto points = manifold_points();
    FrechetResult refined = spdstats::frechet_mean(points, metric_, FrechetConfig::precise(), mean);
    relocate(refined.mean);
    const double residual = mean_vector().norm();
    if (residual > tol) {
      throw NumericalError("center: mean tangent norm " + std::to_string(residual) +
                           " did not drop below " + std::to_string(tol));
    }
    mean_ = std::move(refined);
    variation_.reset();
  }
  centered_ = true;
}

double ConnectomeSample::compute_variation() {
  require_present(mean_.has_value(), "compute_variation needs the Fréchet mean");
  const auto points = manifold_points();
  const auto frame = metric_.at(mean_->mean);
  const auto sq = parallel::map<double>(n_, [&](std::size_t i) {
    return frame.vec(frame.log(points[i])).squaredNorm();
  });
  double total = 0.0;
  for (double v : sq) total += v;
  variation_ = total / static_cast<double>(n_);
  return *variation_;
}

const Matrix& ConnectomeSample::compute_sample_cov() {
  require_present(vectors_.has_value(), "compute_sample_cov needs vector images");
  if (n_ < 2) throw StateError("sample covariance needs at least two observations");
  const Matrix centered = vectors_->rowwise() - vectors_->colwise().mean();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n_ - 1);
  sample_cov_ = 0.5 * (cov + cov.transpose());
  return *sample_cov_;
}

ConnectomeSample rspdnorm(std::size_t n, const SpdMatrix& ref, const Matrix& dispersion,
                          const MetricDescriptor& metric, std::uint64_t seed) {
  const std::size_t d = manifold_dim(ref.dim());
  if (static_cast<std::size_t>(dispersion.rows()) != d ||
      static_cast<std::size_t>(dispersion.cols()) != d) {
    throw ShapeError("dispersion must be " + std::to_string(d) + "x" + std::to_string(d) +
                     " (manifold dimension of " + std::to_string(ref.dim()) + "x" +
                     std::to_string(ref.dim()) + " matrices), got " +
                     std::to_string(dispersion.rows()) + "x" + std::to_string(dispersion.cols()));
  }
  if (n == 0) throw ShapeError("rspdnorm needs n >= 1");
  const Eigen::LLT<Matrix> llt(0.5 * (dispersion + dispersion.transpose()));
  if (llt.info() != Eigen::Success) throw DomainError("dispersion matrix is not positive definite");
  const Matrix factor = llt.matrixL();

  Rng rng = Rng::stream(seed, Rng::Purpose::kNormal);
  const auto dd = static_cast<Eigen::Index>(d);
  Matrix z(static_cast<Eigen::Index>(n), dd);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index k = 0; k < dd; ++k) z(i, k) = rng.normal();
  }
  return ConnectomeSample::from_vectors(z * factor.transpose(), ref, metric);
}

}  // namespace spdstats
