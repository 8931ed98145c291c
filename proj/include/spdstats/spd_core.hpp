#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace spdstats {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Number of free coordinates of a p x p symmetric matrix, p(p+1)/2.
constexpr std::size_t manifold_dim(std::size_t p) noexcept { return p * (p + 1) / 2; }

/// Symmetric matrix in packed upper-triangular storage, row-major over the
/// upper triangle: (0,0) (0,1) ... (0,p-1) (1,1) ... (p-1,p-1).
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim);

  static SymMatrix identity(std::size_t dim);
  static SymMatrix from_packed(std::size_t dim, std::vector<double> packed);
  /// Uses (A + A^T) / 2, so slightly asymmetric inputs from dense kernels are fine.
  static SymMatrix from_dense(const Matrix& a);

  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> packed() const noexcept { return data_; }

  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[index(i, j)];
  }
  void set(std::size_t i, std::size_t j, double value) { data_[index(i, j)] = value; }

  Matrix dense() const;

  SymMatrix& operator+=(const SymMatrix& other);
  SymMatrix& operator-=(const SymMatrix& other);
  SymMatrix& operator*=(double s) noexcept;

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
  friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

 private:
  std::size_t index(std::size_t i, std::size_t j) const noexcept {
    if (i > j) std::swap(i, j);
    return i * dim_ - (i * (i - 1)) / 2 + (j - i);
  }

  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// A symmetric matrix that passed a positive-definiteness check. The only
/// ways to obtain one are validate_spd and the matrix functions below.
class SpdMatrix {
 public:
  static SpdMatrix identity(std::size_t dim);

  const SymMatrix& sym() const noexcept { return base_; }
  std::size_t dim() const noexcept { return base_.dim(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return base_(i, j); }
  Matrix dense() const { return base_.dense(); }

  friend bool operator==(const SpdMatrix& a, const SpdMatrix& b) { return a.base_ == b.base_; }

 private:
  explicit SpdMatrix(SymMatrix base) : base_(std::move(base)) {}
  friend SpdMatrix validate_spd(const SymMatrix&, std::optional<double>);
  friend class SpdAccess;

  SymMatrix base_;
};

/// Eigenvalues in descending order with matching orthonormal eigenvector
/// columns. Each column's first largest-magnitude entry is positive.
struct EigenDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;
};

EigenDecomposition sym_eig(const SymMatrix& s);

/// Relative positivity threshold: 1e-10 * max|lambda|, floored at 1e-12.
double default_spd_tolerance(double max_abs_eigenvalue) noexcept;

/// Certifies `s` when its smallest eigenvalue exceeds `eps` (absolute), or
/// the relative default when `eps` is not given. Throws DomainError.
SpdMatrix validate_spd(const SymMatrix& s, std::optional<double> eps = std::nullopt);
SpdMatrix validate_spd(const Matrix& dense, std::optional<double> eps = std::nullopt);

SpdMatrix matrix_exp_sym(const SymMatrix& s);
SymMatrix matrix_log_spd(const SpdMatrix& p);
SpdMatrix matrix_sqrt_spd(const SpdMatrix& p);
SpdMatrix matrix_invsqrt_spd(const SpdMatrix& p);

/// Lower-triangular L with L L^T = P and a strictly positive diagonal.
Matrix cholesky_lower(const SpdMatrix& p);

/// Symmetric X with X P + P X = V, solved in the eigenbasis of P.
SymMatrix solve_lyapunov(const SpdMatrix& p, const SymMatrix& v);

/// Full-matrix inner product sum_ij A_ij B_ij.
double frobenius_inner(const SymMatrix& a, const SymMatrix& b);
double frobenius_norm(const SymMatrix& a);

bool all_finite(const Matrix& m) noexcept;

namespace linalg {

/// Raw symmetric eigendecomposition (ascending, no sign normalization) used
/// by the hot paths of the metric maps.
struct SymEig {
  Vector values;
  Matrix vectors;
};

SymEig eig(const Matrix& symmetric);

template <typename F>
Matrix apply(const SymEig& e, F&& f) {
  Vector fv(e.values.size());
  for (Eigen::Index i = 0; i < fv.size(); ++i) fv(i) = f(e.values(i));
  return e.vectors * fv.asDiagonal() * e.vectors.transpose();
}

/// Applies the eigenbasis Hadamard operator H -> U (K o (U^T H U)) U^T.
Matrix hadamard_in_basis(const Matrix& basis, const Matrix& kernel, const Matrix& h);

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// First divided differences of log: (log a - log b) / (a - b), 1/a when a == b.
double log_divided_difference(double a, double b) noexcept;

}  // namespace linalg

/// Internal escape hatch for kernels that certify positivity themselves.
class SpdAccess {
 public:
  static SpdMatrix trust(SymMatrix s) { return SpdMatrix(std::move(s)); }
};

}  // namespace spdstats
