#pragma once

#include "spdstats/random.hpp"
#include "spdstats/spd_core.hpp"

#include <cmath>

namespace spdstats::testing {

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

inline Matrix random_orthogonal(Eigen::Index p, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(p, p, rng));
  return qr.householderQ() * Matrix::Identity(p, p);
}

/// Random SPD matrix with condition number at most `cond`: log-eigenvalues
/// uniform on [-log(cond)/2, log(cond)/2], random eigenbasis, random scale.
inline SpdMatrix random_spd(Eigen::Index p, double cond, Rng& rng, double scale = 1.0) {
  const Matrix q = random_orthogonal(p, rng);
  Vector lambda(p);
  const double half = 0.5 * std::log(cond);
  for (Eigen::Index i = 0; i < p; ++i) lambda(i) = scale * std::exp(half * (2.0 * rng.uniform() - 1.0));
  return validate_spd(SymMatrix::from_dense(q * lambda.asDiagonal() * q.transpose()));
}

inline SymMatrix random_sym(Eigen::Index p, double scale, Rng& rng) {
  const Matrix g = gaussian_matrix(p, p, rng);
  return SymMatrix::from_dense(scale * 0.5 * (g + g.transpose()));
}

inline double rel_err(const Matrix& got, const Matrix& want) {
  const double denom = want.norm();
  return (got - want).norm() / (denom > 0 ? denom : 1.0);
}

inline double rel_err(const SymMatrix& got, const SymMatrix& want) {
  return rel_err(got.dense(), want.dense());
}

inline double rel_err(const SpdMatrix& got, const SpdMatrix& want) {
  return rel_err(got.dense(), want.dense());
}

inline SpdMatrix spd(const Matrix& m) { return validate_spd(SymMatrix::from_dense(m)); }

inline SpdMatrix diag_spd(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return spd(v.asDiagonal().toDenseMatrix());
}

}  // namespace spdstats::testing
