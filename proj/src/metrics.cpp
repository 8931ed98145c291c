#include "spdstats/metrics.hpp"

#include "spdstats/error.hpp"

#include <cmath>
#include <memory>
#include <numbers>

namespace spdstats {

namespace {

const double kSqrt2 = std::numbers::sqrt2;

void require_dim(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw ShapeError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                     ", got " + std::to_string(got));
  }
}

void require_coords(std::size_t p, const Vector& c) {
  if (static_cast<std::size_t>(c.size()) != manifold_dim(p)) {
    throw ShapeError("unvec: expected " + std::to_string(manifold_dim(p)) +
                     " coordinates, got " + std::to_string(c.size()));
  }
}

Matrix strictly_lower(const Matrix& m) {
  Matrix out = m.triangularView<Eigen::StrictlyLower>();
  return out;
}

// Coordinates of a lower-triangular matrix Z, enumerated as Z^T's upper
// triangle so the ordering matches triangle_coords.
Vector lower_coords(const Matrix& z) {
  const Eigen::Index p = z.rows();
  Vector c(p * (p + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) c(k++) = z(j, i);
  }
  return c;
}

Matrix from_lower_coords(const Vector& c, Eigen::Index p) {
  Matrix z = Matrix::Zero(p, p);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) z(j, i) = c(k++);
  }
  return z;
}

// --- Euclidean -------------------------------------------------------------

TangentFrame euclidean_frame(const SpdMatrix& ref) {
  const std::size_t p = ref.dim();
  return TangentFrame{
      [ref, p](const SpdMatrix& point) {
        require_dim(p, point.dim(), "euclidean log");
        return point.sym() - ref.sym();
      },
      [ref, p](const SymMatrix& v) {
        require_dim(p, v.dim(), "euclidean exp");
        return validate_spd(ref.sym() + v);
      },
      [p](const SymMatrix& v) {
        require_dim(p, v.dim(), "euclidean vec");
        return triangle_coords(v.dense());
      },
      [p](const Vector& c) {
        require_coords(p, c);
        return SymMatrix::from_dense(from_triangle_coords(c, p));
      }};
}

// --- Affine-invariant --------------------------------------------------------

struct AirmRef {
  std::size_t p;
  Matrix sqrt;
  Matrix invsqrt;
};

std::shared_ptr<const AirmRef> airm_prepare(const SpdMatrix& ref) {
  const auto e = linalg::eig(ref.dense());
  auto r = std::make_shared<AirmRef>();
  r->p = ref.dim();
  r->sqrt = linalg::apply(e, [](double x) { return std::sqrt(x); });
  r->invsqrt = linalg::apply(e, [](double x) { return 1.0 / std::sqrt(x); });
  return r;
}

TangentFrame airm_frame(const SpdMatrix& ref) {
  auto r = airm_prepare(ref);
  return TangentFrame{
      [r](const SpdMatrix& point) {
        require_dim(r->p, point.dim(), "airm log");
        const Matrix w = linalg::symmetrize(r->invsqrt * point.dense() * r->invsqrt);
        const auto e = linalg::eig(w);
        if (!(e.values.minCoeff() > 0.0)) {
          throw DomainError("airm log: whitened point is not positive definite",
                            e.values.minCoeff());
        }
        const Matrix lw = linalg::apply(e, [](double x) { return std::log(x); });
        return SymMatrix::from_dense(r->sqrt * lw * r->sqrt);
      },
      [r](const SymMatrix& v) {
        require_dim(r->p, v.dim(), "airm exp");
        const Matrix w = linalg::symmetrize(r->invsqrt * v.dense() * r->invsqrt);
        const auto ew = matrix_exp_sym(SymMatrix::from_dense(w));
        return validate_spd(SymMatrix::from_dense(r->sqrt * ew.dense() * r->sqrt));
      },
      [r](const SymMatrix& v) {
        require_dim(r->p, v.dim(), "airm vec");
        return triangle_coords(r->invsqrt * v.dense() * r->invsqrt);
      },
      [r](const Vector& c) {
        require_coords(r->p, c);
        return SymMatrix::from_dense(r->sqrt * from_triangle_coords(c, r->p) * r->sqrt);
      }};
}

SymMatrix airm_transport(const SpdMatrix& from, const SpdMatrix& to, const SymMatrix& v) {
  require_dim(from.dim(), to.dim(), "airm transport");
  require_dim(from.dim(), v.dim(), "airm transport");
  // E = (to from^-1)^{1/2} = F^{1/2} (F^{-1/2} to F^{-1/2})^{1/2} F^{-1/2}
  const auto f = airm_prepare(from);
  const auto mid = linalg::eig(linalg::symmetrize(f->invsqrt * to.dense() * f->invsqrt));
  const Matrix mid_sqrt = linalg::apply(mid, [](double x) { return std::sqrt(x); });
  const Matrix e = f->sqrt * mid_sqrt * f->invsqrt;
  return SymMatrix::from_dense(e * v.dense() * e.transpose());
}

// --- Log-Euclidean -----------------------------------------------------------

struct LogEuclideanRef {
  std::size_t p;
  Matrix basis;
  Matrix log_ref;
  Matrix dlog_kernel;  // first divided differences of log on eigenvalue pairs
  Matrix dexp_kernel;  // their reciprocals: divided differences of exp at log(ref)
};

std::shared_ptr<const LogEuclideanRef> log_euclidean_prepare(const SpdMatrix& ref) {
  const auto e = linalg::eig(ref.dense());
  if (!(e.values.minCoeff() > 0.0)) {
    throw DomainError("log-euclidean: reference is not positive definite", e.values.minCoeff());
  }
  auto r = std::make_shared<LogEuclideanRef>();
  r->p = ref.dim();
  r->basis = e.vectors;
  r->log_ref = linalg::apply(e, [](double x) { return std::log(x); });
  const Eigen::Index n = e.values.size();
  r->dlog_kernel.resize(n, n);
  r->dexp_kernel.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double k = linalg::log_divided_difference(e.values(i), e.values(j));
      r->dlog_kernel(i, j) = k;
      r->dexp_kernel(i, j) = 1.0 / k;
    }
  }
  return r;
}

Matrix dlog_at(const LogEuclideanRef& r, const Matrix& v) {
  return linalg::symmetrize(linalg::hadamard_in_basis(r.basis, r.dlog_kernel, v));
}

Matrix dexp_at(const LogEuclideanRef& r, const Matrix& h) {
  return linalg::symmetrize(linalg::hadamard_in_basis(r.basis, r.dexp_kernel, h));
}

TangentFrame log_euclidean_frame(const SpdMatrix& ref) {
  auto r = log_euclidean_prepare(ref);
  return TangentFrame{
      [r](const SpdMatrix& point) {
        require_dim(r->p, point.dim(), "log-euclidean log");
        const Matrix diff = matrix_log_spd(point).dense() - r->log_ref;
        return SymMatrix::from_dense(dexp_at(*r, diff));
      },
      [r](const SymMatrix& v) {
        require_dim(r->p, v.dim(), "log-euclidean exp");
        return matrix_exp_sym(SymMatrix::from_dense(r->log_ref + dlog_at(*r, v.dense())));
      },
      [r](const SymMatrix& v) {
        require_dim(r->p, v.dim(), "log-euclidean vec");
        return triangle_coords(dlog_at(*r, v.dense()));
      },
      [r](const Vector& c) {
        require_coords(r->p, c);
        return SymMatrix::from_dense(dexp_at(*r, from_triangle_coords(c, r->p)));
      }};
}

SymMatrix log_euclidean_transport(const SpdMatrix& from, const SpdMatrix& to,
                                  const SymMatrix& v) {
  require_dim(from.dim(), to.dim(), "log-euclidean transport");
  require_dim(from.dim(), v.dim(), "log-euclidean transport");
  const auto f = log_euclidean_prepare(from);
  const auto t = log_euclidean_prepare(to);
  return SymMatrix::from_dense(dexp_at(*t, dlog_at(*f, v.dense())));
}

// --- Log-Cholesky ------------------------------------------------------------
//
// Coordinates phi(P) = strict_lower(L) + log(diag(L)), L = chol(P). The
// differential of phi at P maps X to strict_lower(Ldot) + diag(Ldot)/diag(L)
// with Ldot = L (L^-1 X L^-T)_half, where (S)_half keeps the strict lower
// part and halves the diagonal. The metric is the Euclidean metric on
// lower-triangular matrices pulled back through phi.

struct LogCholeskyRef {
  std::size_t p;
  Matrix chol;
  Vector diag;
  Matrix phi;
};

Matrix phi_of(const Matrix& l) {
  Matrix z = strictly_lower(l);
  for (Eigen::Index i = 0; i < l.rows(); ++i) z(i, i) = std::log(l(i, i));
  return z;
}

std::shared_ptr<const LogCholeskyRef> log_cholesky_prepare(const SpdMatrix& ref) {
  auto r = std::make_shared<LogCholeskyRef>();
  r->p = ref.dim();
  r->chol = cholesky_lower(ref);
  r->diag = r->chol.diagonal();
  r->phi = phi_of(r->chol);
  return r;
}

Matrix dphi_at(const LogCholeskyRef& r, const Matrix& x) {
  const auto lview = r.chol.triangularView<Eigen::Lower>();
  Matrix m = lview.solve(x);
  m = lview.solve(m.transpose()).transpose();
  Matrix half = strictly_lower(m);
  half.diagonal() = 0.5 * m.diagonal();
  const Matrix ldot = r.chol * half;
  Matrix z = strictly_lower(ldot);
  z.diagonal() = ldot.diagonal().cwiseQuotient(r.diag);
  return z;
}

Matrix dphi_inverse_at(const LogCholeskyRef& r, const Matrix& z) {
  Matrix ldot = strictly_lower(z);
  ldot.diagonal() = z.diagonal().cwiseProduct(r.diag);
  const Matrix cross = ldot * r.chol.transpose();
  return cross + cross.transpose();
}

TangentFrame log_cholesky_frame(const SpdMatrix& ref) {
  auto r = log_cholesky_prepare(ref);
  return TangentFrame{
      [r](const SpdMatrix& point) {
        require_dim(r->p, point.dim(), "log-cholesky log");
        const Matrix z = phi_of(cholesky_lower(point)) - r->phi;
        return SymMatrix::from_dense(dphi_inverse_at(*r, z));
      },
      [r](const SymMatrix& v) {
        require_dim(r->p, v.dim(), "log-cholesky exp");
        const Matrix z = r->phi + dphi_at(*r, v.dense());
        Matrix l = strictly_lower(z);
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
          if (z(i, i) > 700.0) throw NumericalError("log-cholesky exp overflows");
          l(i, i) = std::exp(z(i, i));
        }
        return validate_spd(SymMatrix::from_dense(l * l.transpose()));
      },
      [r](const SymMatrix& v) {
        require_dim(r->p, v.dim(), "log-cholesky vec");
        return lower_coords(dphi_at(*r, v.dense()));
      },
      [r](const Vector& c) {
        require_coords(r->p, c);
        const auto p = static_cast<Eigen::Index>(r->p);
        return SymMatrix::from_dense(dphi_inverse_at(*r, from_lower_coords(c, p)));
      }};
}

// --- Bures-Wasserstein -------------------------------------------------------

struct BuresRef {
  std::size_t p;
  Matrix sigma;
  Matrix basis;
  Matrix sqrt;
  Matrix invsqrt;
  Matrix lyapunov_kernel;  // 1 / (s_i + s_j)
  Matrix frame_kernel;     // 1 / sqrt(2 (s_i + s_j))
};

std::shared_ptr<const BuresRef> bures_prepare(const SpdMatrix& ref) {
  const auto e = linalg::eig(ref.dense());
  if (!(e.values.minCoeff() > 0.0)) {
    throw DomainError("bures-wasserstein: reference is not positive definite",
                      e.values.minCoeff());
  }
  auto r = std::make_shared<BuresRef>();
  r->p = ref.dim();
  r->sigma = ref.dense();
  r->basis = e.vectors;
  r->sqrt = linalg::apply(e, [](double x) { return std::sqrt(x); });
  r->invsqrt = linalg::apply(e, [](double x) { return 1.0 / std::sqrt(x); });
  const Eigen::Index n = e.values.size();
  r->lyapunov_kernel.resize(n, n);
  r->frame_kernel.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double s = e.values(i) + e.values(j);
      r->lyapunov_kernel(i, j) = 1.0 / s;
      r->frame_kernel(i, j) = 1.0 / std::sqrt(2.0 * s);
    }
  }
  return r;
}

TangentFrame bures_frame(const SpdMatrix& ref) {
  auto r = bures_prepare(ref);
  return TangentFrame{
      [r](const SpdMatrix& point) {
        require_dim(r->p, point.dim(), "bures-wasserstein log");
        const Matrix mid = linalg::symmetrize(r->sqrt * point.dense() * r->sqrt);
        const auto e = linalg::eig(mid);
        const Matrix root = linalg::apply(e, [](double x) { return std::sqrt(std::max(x, 0.0)); });
        const Matrix t = r->sqrt * root * r->invsqrt;
        return SymMatrix::from_dense(t + t.transpose() - 2.0 * r->sigma);
      },
      [r](const SymMatrix& v) {
        require_dim(r->p, v.dim(), "bures-wasserstein exp");
        const Matrix vd = v.dense();
        const Matrix lv = linalg::hadamard_in_basis(r->basis, r->lyapunov_kernel, vd);
        return validate_spd(SymMatrix::from_dense(r->sigma + vd + lv * r->sigma * lv));
      },
      [r](const SymMatrix& v) {
        require_dim(r->p, v.dim(), "bures-wasserstein vec");
        return triangle_coords(linalg::hadamard_in_basis(r->basis, r->frame_kernel, v.dense()));
      },
      [r](const Vector& c) {
        require_coords(r->p, c);
        const Matrix inv_kernel = r->frame_kernel.cwiseInverse();
        return SymMatrix::from_dense(
            linalg::hadamard_in_basis(r->basis, inv_kernel, from_triangle_coords(c, r->p)));
      }};
}

std::string normalize_name(std::string_view name) {
  std::string out(name);
  for (char& ch : out) {
    if (ch == '_') ch = '-';
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

}  // namespace

Vector triangle_coords(const Matrix& symmetric) {
  const Eigen::Index p = symmetric.rows();
  Vector c(p * (p + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    c(k++) = symmetric(i, i);
    for (Eigen::Index j = i + 1; j < p; ++j) {
      c(k++) = kSqrt2 * 0.5 * (symmetric(i, j) + symmetric(j, i));
    }
  }
  return c;
}

Matrix from_triangle_coords(const Vector& coords, std::size_t p) {
  const auto n = static_cast<Eigen::Index>(p);
  Matrix m(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = coords(k++);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = coords(k++) / kSqrt2;
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

std::size_t dim_from_coords(std::size_t d) {
  const auto p = static_cast<std::size_t>(std::llround((std::sqrt(8.0 * double(d) + 1.0) - 1.0) / 2.0));
  if (manifold_dim(p) != d) {
    throw ShapeError(std::to_string(d) + " is not a valid coordinate count p(p+1)/2");
  }
  return p;
}

const MetricDescriptor& euclidean_metric() {
  static const MetricDescriptor m{
      "euclidean", euclidean_frame,
      [](const SpdMatrix& from, const SpdMatrix& to, const SymMatrix& v) {
        require_dim(from.dim(), to.dim(), "euclidean transport");
        require_dim(from.dim(), v.dim(), "euclidean transport");
        return v;
      }};
  return m;
}

const MetricDescriptor& airm_metric() {
  static const MetricDescriptor m{"airm", airm_frame, airm_transport};
  return m;
}

const MetricDescriptor& log_euclidean_metric() {
  static const MetricDescriptor m{"log-euclidean", log_euclidean_frame, log_euclidean_transport};
  return m;
}

const MetricDescriptor& log_cholesky_metric() {
  static const MetricDescriptor m{"log-cholesky", log_cholesky_frame, {}};
  return m;
}

const MetricDescriptor& bures_wasserstein_metric() {
  static const MetricDescriptor m{"bures-wasserstein", bures_frame, {}};
  return m;
}

const MetricDescriptor& metric_by_name(std::string_view name) {
  const std::string key = normalize_name(name);
  if (key == "euclidean") return euclidean_metric();
  if (key == "airm") return airm_metric();
  if (key == "log-euclidean") return log_euclidean_metric();
  if (key == "log-cholesky") return log_cholesky_metric();
  if (key == "bures-wasserstein") return bures_wasserstein_metric();
  throw UnsupportedMetric("unknown metric '" + std::string(name) +
                          "' (expected euclidean, airm, log-euclidean, log-cholesky or "
                          "bures-wasserstein)");
}

MetricDescriptor make_metric(
    std::string name, std::function<SymMatrix(const SpdMatrix&, const SpdMatrix&)> log,
    std::function<SpdMatrix(const SpdMatrix&, const SymMatrix&)> exp,
    std::function<Vector(const SpdMatrix&, const SymMatrix&)> vec,
    std::function<SymMatrix(const SpdMatrix&, const Vector&)> unvec,
    MetricDescriptor::Transport transport) {
  auto at = [log, exp, vec, unvec](const SpdMatrix& ref) {
    return TangentFrame{[log, ref](const SpdMatrix& p) { return log(ref, p); },
                        [exp, ref](const SymMatrix& v) { return exp(ref, v); },
                        [vec, ref](const SymMatrix& v) { return vec(ref, v); },
                        [unvec, ref](const Vector& c) { return unvec(ref, c); }};
  };
  return MetricDescriptor{std::move(name), std::move(at), std::move(transport)};
}

double distance(const MetricDescriptor& metric, const SpdMatrix& a, const SpdMatrix& b) {
  if (a.dim() != b.dim()) throw ShapeError("distance: dimension mismatch");
  const auto frame = metric.at(a);
  return frame.vec(frame.log(b)).norm();
}

SymMatrix parallel_transport(const MetricDescriptor& metric, const SpdMatrix& from,
                             const SpdMatrix& to, const SymMatrix& v) {
  if (!metric.supports_transport()) {
    throw UnsupportedMetric("parallel transport is not available for the " + metric.name +
                            " metric");
  }
  return metric.transport(from, to, v);
}

}  // namespace spdstats
