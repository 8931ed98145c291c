#include "spdstats/spd_core.hpp"

#include "spdstats/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace spdstats {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                     " vs " + std::to_string(b) + ")");
  }
}

constexpr double kMaxExpArgument = 700.0;

}  // namespace

bool all_finite(const Matrix& m) noexcept { return m.allFinite(); }

SymMatrix::SymMatrix(std::size_t dim) : dim_(dim), data_(manifold_dim(dim), 0.0) {}

SymMatrix SymMatrix::identity(std::size_t dim) {
  SymMatrix s(dim);
  for (std::size_t i = 0; i < dim; ++i) s.set(i, i, 1.0);
  return s;
}

SymMatrix SymMatrix::from_packed(std::size_t dim, std::vector<double> packed) {
  if (packed.size() != manifold_dim(dim)) {
    throw ShapeError("packed storage of a " + std::to_string(dim) + "x" + std::to_string(dim) +
                     " symmetric matrix needs " + std::to_string(manifold_dim(dim)) +
                     " entries, got " + std::to_string(packed.size()));
  }
  for (double v : packed) {
    if (!std::isfinite(v)) throw NumericalError("symmetric matrix has a non-finite entry");
  }
  SymMatrix s;
  s.dim_ = dim;
  s.data_ = std::move(packed);
  return s;
}

SymMatrix SymMatrix::from_dense(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("symmetric matrix must be square");
  if (!a.allFinite()) throw NumericalError("symmetric matrix has a non-finite entry");
  const auto p = static_cast<std::size_t>(a.rows());
  SymMatrix s(p);
  std::size_t k = 0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      s.data_[k++] = 0.5 * (a(ii, jj) + a(jj, ii));
    }
  }
  return s;
}

Matrix SymMatrix::dense() const {
  const auto p = static_cast<Eigen::Index>(dim_);
  Matrix m(p, p);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) {
      m(i, j) = data_[k];
      m(j, i) = data_[k];
      ++k;
    }
  }
  return m;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
  require_same_dim(dim_, other.dim_, "SymMatrix +");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& other) {
  require_same_dim(dim_, other.dim_, "SymMatrix -");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

SpdMatrix SpdMatrix::identity(std::size_t dim) { return SpdMatrix(SymMatrix::identity(dim)); }

namespace linalg {

SymEig eig(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Matrix hadamard_in_basis(const Matrix& basis, const Matrix& kernel, const Matrix& h) {
  Matrix rotated = basis.transpose() * h * basis;
  rotated = rotated.cwiseProduct(kernel);
  return basis * rotated * basis.transpose();
}

double log_divided_difference(double a, double b) noexcept {
  const double x = (a - b) / b;
  if (std::abs(x) < 1e-8) {
    // log1p(x)/x ~ 1 - x/2 + x^2/3
    return (1.0 - x / 2.0 + x * x / 3.0) / b;
  }
  return std::log1p(x) / (a - b);
}

}  // namespace linalg

EigenDecomposition sym_eig(const SymMatrix& s) {
  const auto raw = linalg::eig(s.dense());
  const auto p = raw.values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return raw.values(a) > raw.values(b); });

  EigenDecomposition out{Vector(p), Matrix(p, p)};
  for (Eigen::Index c = 0; c < p; ++c) {
    const Eigen::Index src = order[static_cast<std::size_t>(c)];
    out.eigenvalues(c) = raw.values(src);
    Vector col = raw.vectors.col(src);
    Eigen::Index pivot = 0;
    for (Eigen::Index r = 1; r < p; ++r) {
      if (std::abs(col(r)) > std::abs(col(pivot)) + 1e-12) pivot = r;
    }
    if (col(pivot) < 0) col = -col;
    out.eigenvectors.col(c) = col;
  }
  return out;
}

double default_spd_tolerance(double max_abs_eigenvalue) noexcept {
  return std::max(1e-10 * max_abs_eigenvalue, 1e-12);
}

namespace {

SpdMatrix certify(SymMatrix s, double min_eig, double max_abs_eig, std::optional<double> eps) {
  const double threshold = eps ? *eps : default_spd_tolerance(max_abs_eig);
  if (!(min_eig > threshold)) {
    throw DomainError("matrix is not positive definite: smallest eigenvalue " +
                          std::to_string(min_eig) + " <= tolerance " + std::to_string(threshold),
                      min_eig);
  }
  return SpdAccess::trust(std::move(s));
}

}  // namespace

SpdMatrix validate_spd(const SymMatrix& s, std::optional<double> eps) {
  const auto e = linalg::eig(s.dense());
  const double min_eig = e.values.minCoeff();
  const double max_abs = e.values.cwiseAbs().maxCoeff();
  return certify(s, min_eig, max_abs, eps);
}

SpdMatrix validate_spd(const Matrix& dense, std::optional<double> eps) {
  return validate_spd(SymMatrix::from_dense(dense), eps);
}

SpdMatrix matrix_exp_sym(const SymMatrix& s) {
  const auto e = linalg::eig(s.dense());
  if (e.values.maxCoeff() > kMaxExpArgument) {
    throw NumericalError("matrix exponential overflows: eigenvalue " +
                         std::to_string(e.values.maxCoeff()));
  }
  const Matrix out = linalg::apply(e, [](double x) { return std::exp(x); });
  return certify(SymMatrix::from_dense(out), std::exp(e.values.minCoeff()),
                 std::exp(e.values.maxCoeff()), std::nullopt);
}

namespace {

linalg::SymEig positive_eig(const SpdMatrix& p) {
  auto e = linalg::eig(p.dense());
  const double min_eig = e.values.minCoeff();
  const double tol = default_spd_tolerance(e.values.cwiseAbs().maxCoeff());
  if (!(min_eig > tol)) {
    throw DomainError("matrix function needs an SPD argument: smallest eigenvalue " +
                          std::to_string(min_eig),
                      min_eig);
  }
  return e;
}

}  // namespace

SymMatrix matrix_log_spd(const SpdMatrix& p) {
  const auto e = positive_eig(p);
  return SymMatrix::from_dense(linalg::apply(e, [](double x) { return std::log(x); }));
}

SpdMatrix matrix_sqrt_spd(const SpdMatrix& p) {
  const auto e = positive_eig(p);
  return SpdAccess::trust(
      SymMatrix::from_dense(linalg::apply(e, [](double x) { return std::sqrt(x); })));
}

SpdMatrix matrix_invsqrt_spd(const SpdMatrix& p) {
  const auto e = positive_eig(p);
  return SpdAccess::trust(
      SymMatrix::from_dense(linalg::apply(e, [](double x) { return 1.0 / std::sqrt(x); })));
}

Matrix cholesky_lower(const SpdMatrix& p) {
  const Matrix a = p.dense();
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > 0.0)) {
      throw DomainError("Cholesky factorization hit a non-positive pivot at column " +
                            std::to_string(j),
                        pivot);
    }
    l(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return l;
}

SymMatrix solve_lyapunov(const SpdMatrix& p, const SymMatrix& v) {
  require_same_dim(p.dim(), v.dim(), "solve_lyapunov");
  const auto e = positive_eig(p);
  const Eigen::Index n = e.values.size();
  Matrix kernel(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) kernel(i, j) = 1.0 / (e.values(i) + e.values(j));
  }
  return SymMatrix::from_dense(linalg::hadamard_in_basis(e.vectors, kernel, v.dense()));
}

double frobenius_inner(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a.dim(), b.dim(), "frobenius_inner");
  const auto p = a.dim();
  double sum = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      const double w = (i == j) ? 1.0 : 2.0;
      sum += w * a(i, j) * b(i, j);
    }
  }
  return sum;
}

double frobenius_norm(const SymMatrix& a) { return std::sqrt(frobenius_inner(a, a)); }

}  // namespace spdstats
