#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace dobc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A singular value s counts toward the rank when s > relative * max(1, s_max).
struct RankTolerance {
  double relative = 1e-9;
};

inline double rank_threshold(const Vector& singular_values, RankTolerance tol) {
  double smax = singular_values.size() ? singular_values(0) : 0.0;
  return tol.relative * std::max(1.0, smax);
}

inline Eigen::Index numerical_rank(const Matrix& m, RankTolerance tol = {}) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  double thr = rank_threshold(s, tol);
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > thr) ++r;
  return r;
}

// Columns form an orthonormal basis of Im(m).
inline Matrix orthonormal_range_basis(const Matrix& m, RankTolerance tol = {}) {
  if (m.rows() == 0 || m.cols() == 0) return Matrix(m.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
  const Vector& s = svd.singularValues();
  double thr = rank_threshold(s, tol);
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > thr) ++r;
  return svd.matrixU().leftCols(r);
}

// Rows are orthonormal and span the left null space of m, so annihilator(m) * m = 0.
// A matrix without columns is annihilated by nothing, so the identity is returned.
inline Matrix annihilator(const Matrix& m, RankTolerance tol = {}) {
  const Eigen::Index n = m.rows();
  if (m.cols() == 0) return Matrix::Identity(n, n);
  if (n == 0) return Matrix(0, 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
  const Vector& s = svd.singularValues();
  double thr = rank_threshold(s, tol);
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > thr) ++r;
  return svd.matrixU().rightCols(n - r).transpose();
}

// Orthonormal basis of ker(m), as columns.
inline Matrix null_space(const Matrix& m, RankTolerance tol = {}) {
  const Eigen::Index n = m.cols();
  if (m.rows() == 0) return Matrix::Identity(n, n);
  if (n == 0) return Matrix(0, 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  double thr = rank_threshold(s, tol);
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > thr) ++r;
  return svd.matrixV().rightCols(n - r);
}

inline Matrix pseudo_inverse(const Matrix& m, RankTolerance tol = {}) {
  if (m.rows() == 0 || m.cols() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  double thr = rank_threshold(s, tol);
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > thr) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Nonsingular Phi, Psi and r with Phi * m * Psi = [I_r 0; 0 0].
struct RankFactorization {
  Matrix phi;
  Matrix psi;
  Eigen::Index rank = 0;
};

inline RankFactorization rank_factorization(const Matrix& m, RankTolerance tol = {}) {
  RankFactorization out;
  const Eigen::Index rows = m.rows(), cols = m.cols();
  if (rows == 0 || cols == 0) {
    out.phi = Matrix::Identity(rows, rows);
    out.psi = Matrix::Identity(cols, cols);
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  double thr = rank_threshold(s, tol);
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > thr) ++r;
  Vector scale = Vector::Ones(rows);
  for (Eigen::Index i = 0; i < r; ++i) scale(i) = 1.0 / s(i);
  out.phi = scale.asDiagonal() * svd.matrixU().transpose();
  out.psi = svd.matrixV();
  out.rank = r;
  return out;
}

// QR of m^T with a positive diagonal: returns T_tilde (nonsingular) and T
// (orthonormal columns) such that T_tilde * m = T^T.
struct RowspaceBasis {
  Matrix t_tilde;
  Matrix t;
};

inline RowspaceBasis gram_schmidt_rowspace(const Matrix& m, RankTolerance tol = {}) {
  const Eigen::Index k = m.rows(), n = m.cols();
  if (k > n || numerical_rank(m, tol) < k)
    throw RankDeficient("gram_schmidt_rowspace: rows of m are not linearly independent");
  RowspaceBasis out;
  if (k == 0) {
    out.t_tilde = Matrix(0, 0);
    out.t = Matrix(n, 0);
    return out;
  }
  Eigen::HouseholderQR<Matrix> qr(m.transpose());
  Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < k; ++i) {
    if (r(i, i) < 0) {
      r.row(i) *= -1.0;
      q.col(i) *= -1.0;
    }
  }
  out.t = q;
  // R^{-T} m = R^{-T} R^T Q^T = Q^T
  out.t_tilde = r.transpose().triangularView<Eigen::Lower>().solve(Matrix::Identity(k, k));
  return out;
}

inline std::vector<double> spectrum_real_parts(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("spectrum_real_parts: matrix is not square");
  std::vector<double> re;
  if (m.rows() == 0) return re;
  Eigen::EigenSolver<Matrix> es(m, false);
  for (Eigen::Index i = 0; i < m.rows(); ++i) re.push_back(es.eigenvalues()(i).real());
  std::sort(re.begin(), re.end(), std::greater<>());
  return re;
}

inline double spectral_abscissa(const Matrix& m) {
  auto re = spectrum_real_parts(m);
  return re.empty() ? -std::numeric_limits<double>::infinity() : re.front();
}

inline bool spans_equal(const Matrix& a, const Matrix& b, RankTolerance tol = {}) {
  if (a.rows() != b.rows()) throw DimensionMismatch("spans_equal: row counts differ");
  Matrix ab(a.rows(), a.cols() + b.cols());
  ab << a, b;
  auto ra = numerical_rank(a, tol), rb = numerical_rank(b, tol);
  return ra == rb && numerical_rank(ab, tol) == ra;
}

// Largest principal angle between Im(a) and Im(b), in radians.
inline double subspace_angle(const Matrix& a, const Matrix& b, RankTolerance tol = {}) {
  if (a.rows() != b.rows()) throw DimensionMismatch("subspace_angle: row counts differ");
  Matrix qa = orthonormal_range_basis(a, tol), qb = orthonormal_range_basis(b, tol);
  if (qa.cols() != qb.cols()) return M_PI / 2;
  if (qa.cols() == 0) return 0.0;
  Matrix resid = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<Matrix> svd(resid);
  double s = std::min(1.0, svd.singularValues()(0));
  return std::asin(s);
}

namespace detail {

// Solves F^T P + P F + Q = 0 without checking stability of F.
inline Matrix lyapunov_kron(const Matrix& f, const Matrix& q) {
  const Eigen::Index n = f.rows();
  if (n == 0) return Matrix(0, 0);
  const Matrix id = Matrix::Identity(n, n);
  const Matrix ft = f.transpose();
  Matrix big = Matrix::Zero(n * n, n * n);
  // column-major vec: vec(F^T P) = (I kron F^T) vec P, vec(P F) = (F^T kron I) vec P
  for (Eigen::Index i = 0; i < n; ++i) {
    big.block(i * n, i * n, n, n) += ft;
    for (Eigen::Index j = 0; j < n; ++j) big.block(i * n, j * n, n, n) += ft(i, j) * id;
  }
  Vector rhs = -Eigen::Map<const Vector>(q.data(), n * n);
  Vector p = big.partialPivLu().solve(rhs);
  Matrix out = Eigen::Map<Matrix>(p.data(), n, n);
  return 0.5 * (out + out.transpose());
}

inline Matrix matrix_sign(const Matrix& h, int max_iter = 100) {
  const Eigen::Index n = h.rows();
  Matrix z = h;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::PartialPivLU<Matrix> lu(z);
    Vector diag = lu.matrixLU().diagonal().cwiseAbs();
    if (diag.minCoeff() <= 0) throw NotStabilizable("matrix sign iteration hit a singular iterate");
    double c = std::exp(-diag.array().log().sum() / static_cast<double>(n));
    Matrix next = 0.5 * (c * z + lu.inverse() / c);
    double change = (next - z).norm();
    z = next;
    if (change <= 1e-10 * z.norm()) return z;
  }
  throw NotStabilizable("matrix sign iteration did not converge (eigenvalues near the imaginary axis)");
}

// Stabilizing solution of A^T X + X A - X G X + Q = 0 with G = B B^T.
inline Matrix care_control(const Matrix& a, const Matrix& b, const Matrix& q) {
  const Eigen::Index n = a.rows();
  if (n == 0) return Matrix(0, 0);
  const Matrix g = b * b.transpose();
  Matrix h(2 * n, 2 * n);
  h << a, -g, -q, -a.transpose();
  Matrix w = matrix_sign(h);
  Matrix lhs(2 * n, n), rhs(2 * n, n);
  lhs << w.topRightCorner(n, n), w.bottomRightCorner(n, n) + Matrix::Identity(n, n);
  rhs << w.topLeftCorner(n, n) + Matrix::Identity(n, n), w.bottomLeftCorner(n, n);
  Matrix x = lhs.colPivHouseholderQr().solve(-rhs);
  x = 0.5 * (x + x.transpose());

  // Newton-Kleinman refinement from the sign-function guess.
  for (int it = 0; it < 50; ++it) {
    Matrix k = b.transpose() * x;
    Matrix acl = a - b * k;
    if (spectral_abscissa(acl) >= 0)
      throw NotStabilizable("care: no stabilizing initial gain (pair is not stabilizable)");
    Matrix next = lyapunov_kron(acl, q + k.transpose() * k);
    double change = (next - x).norm();
    x = next;
    if (change <= 1e-14 * (1.0 + x.norm())) break;
  }
  if (spectral_abscissa(a - g * x) >= 0)
    throw NotStabilizable("care: solution is not stabilizing");
  return x;
}

}  // namespace detail

enum class CareForm { Control, Observer };

// Control form:  (A+sI)^T X + X (A+sI) - X B B^T X + Q = 0
// Observer form: (A+sI) X + X (A+sI)^T - X B^T B X + Q = 0  (B plays the role of C)
inline Matrix solve_care(const Matrix& a, const Matrix& b, const Matrix& q, double shift = 0.0,
                         CareForm form = CareForm::Control) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n)
    throw DimensionMismatch("solve_care: A and Q must be square and of equal size");
  Matrix as = a + shift * Matrix::Identity(n, n);
  if (form == CareForm::Control) {
    if (b.rows() != n) throw DimensionMismatch("solve_care: B must have as many rows as A");
    return detail::care_control(as, b, q);
  }
  if (b.cols() != n) throw DimensionMismatch("solve_care: C must have as many columns as A");
  return detail::care_control(as.transpose(), b.transpose(), q);
}

// P with F^T P + P F + Q = 0, F Hurwitz.
inline Matrix solve_lyapunov(const Matrix& f, const Matrix& q) {
  if (f.rows() != f.cols() || q.rows() != f.rows() || q.cols() != f.cols())
    throw DimensionMismatch("solve_lyapunov: F and Q must be square and of equal size");
  if (spectral_abscissa(f) >= 0) throw UnstableMatrix("solve_lyapunov: F is not Hurwitz");
  return detail::lyapunov_kron(f, q);
}

inline Matrix hstack(const std::vector<Matrix>& blocks, Eigen::Index rows) {
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) throw DimensionMismatch("hstack: row counts differ");
    cols += b.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    out.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return out;
}

inline Matrix vstack(const std::vector<Matrix>& blocks, Eigen::Index cols) {
  Eigen::Index rows = 0;
  for (const auto& b : blocks) {
    if (b.cols() != cols) throw DimensionMismatch("vstack: column counts differ");
    rows += b.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

}  // namespace dobc
