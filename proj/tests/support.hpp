#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "dobc/matrix_kernels.hpp"

namespace dobc::testing {

// Columns are unit vectors e_k (1-based) scaled by the given signs/weights.
inline Matrix columns(Eigen::Index n, std::initializer_list<std::initializer_list<std::pair<int, double>>> cols) {
  Matrix m = Matrix::Zero(n, Eigen::Index(cols.size()));
  Eigen::Index j = 0;
  for (const auto& col : cols) {
    for (auto [k, w] : col) m(k - 1, j) = w;
    ++j;
  }
  return m;
}

// Reference T_id of the nine-state network (nodes 1..6); index 6 is node 2 of the
// stabilization example. 0.7071 is taken as sqrt(2)/2.
inline std::vector<Matrix> reference_tid() {
  const double h = std::sqrt(0.5);
  const Eigen::Index n = 9;
  return {
      columns(n, {{{1, 1.0}}}),
      columns(n, {{{7, 0.5}, {8, -h}, {9, 0.5}}, {{4, -h}, {7, 0.5}, {9, -0.5}}, {{3, -1.0}}}),
      columns(n, {{{6, -1.0}}, {{5, 1.0}}}),
      columns(n, {{{8, 1.0}}, {{9, 1.0}}, {{7, -1.0}}}),
      columns(n, {{{2, 1.0}}}),
      columns(n, {{{4, 1.0}}}),
      columns(n, {{{3, 1.0}}}),
  };
}

using Rng = std::mt19937_64;

inline Matrix gaussian(Rng& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

inline Matrix random_orthogonal(Rng& rng, Eigen::Index n) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(rng, n, n));
  return qr.householderQ() * Matrix::Identity(n, n);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

struct System {
  Matrix a, b_minus, c;
};

// 3-6 states, 1-2 outputs, 0-2 unknown inputs; full-rank C and B_minus.
inline System random_system(Rng& rng) {
  const int n = uniform_int(rng, 3, 6);
  const int p = uniform_int(rng, 1, 2);
  const int m = uniform_int(rng, 0, 2);
  return {gaussian(rng, n, n), gaussian(rng, n, m), gaussian(rng, p, n)};
}

// A = Q [A11 0; A21 A22] Q^T, C = [C1 0] Q^T with every eigenvalue of A22 at |Re| >= 0.2,
// so the undetectable subspace is the unstable part of Q span(e_{no+1..n}).
struct ConstructedCase {
  Matrix a, c;
  Matrix undetectable;  // orthonormal basis known by construction
};

inline ConstructedCase constructed_unobservable(Rng& rng) {
  for (;;) {
    const int n = uniform_int(rng, 3, 6);
    const int k = uniform_int(rng, 1, n - 1);
    const int no = n - k;
    const int p = uniform_int(rng, 1, std::min(2, no));
    Matrix a11 = gaussian(rng, no, no), a21 = gaussian(rng, k, no), a22 = gaussian(rng, k, k);
    Matrix c1 = gaussian(rng, p, no);
    Eigen::EigenSolver<Matrix> e22(a22, false), e11(a11, false);
    bool ok = true;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (std::abs(e22.eigenvalues()(j).real()) < 0.2) ok = false;
      for (Eigen::Index i = 0; i < no; ++i)
        if (std::abs(e22.eigenvalues()(j) - e11.eigenvalues()(i)) < 0.2) ok = false;
    }
    if (!ok) continue;
    Matrix a = Matrix::Zero(n, n);
    a.topLeftCorner(no, no) = a11;
    a.bottomLeftCorner(k, no) = a21;
    a.bottomRightCorner(k, k) = a22;
    Matrix c = Matrix::Zero(p, n);
    c.leftCols(no) = c1;
    Eigen::EigenSolver<Matrix> es(a22);
    std::vector<Vector> parts;
    for (Eigen::Index j = 0; j < k; ++j)
      if (es.eigenvalues()(j).real() > 0) {
        parts.push_back(es.eigenvectors().col(j).real());
        parts.push_back(es.eigenvectors().col(j).imag());
      }
    Matrix u = Matrix::Zero(n, Eigen::Index(parts.size()));
    for (std::size_t j = 0; j < parts.size(); ++j) u.block(no, Eigen::Index(j), k, 1) = parts[j];
    Matrix q = random_orthogonal(rng, n);
    return {q * a * q.transpose(), c * q.transpose(), orthonormal_range_basis(q * u)};
  }
}

// Independent PBH computation: span of real/imag parts of ker [A - lambda I; C] over
// eigenvalues with Re >= 0 (eigenvalues assumed semisimple).
inline Matrix pbh_undetectable(const Matrix& a, const Matrix& c) {
  using Cx = std::complex<double>;
  const Eigen::Index n = a.rows();
  Eigen::EigenSolver<Matrix> es(a, false);
  std::vector<Vector> parts;
  for (Eigen::Index k = 0; k < n; ++k) {
    Cx lam = es.eigenvalues()(k);
    if (lam.real() < 0) continue;
    Eigen::MatrixXcd pbh(n + c.rows(), n);
    pbh << a.cast<Cx>() - lam * Eigen::MatrixXcd::Identity(n, n), c.cast<Cx>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    for (Eigen::Index j = 0; j < n; ++j)
      if (s(j) < 1e-7 * std::max(1.0, s(0))) {
        parts.push_back(svd.matrixV().col(j).real());
        parts.push_back(svd.matrixV().col(j).imag());
      }
  }
  Matrix m = Matrix::Zero(n, Eigen::Index(parts.size()));
  for (std::size_t j = 0; j < parts.size(); ++j) m.col(Eigen::Index(j)) = parts[j];
  return parts.empty() ? Matrix(n, 0) : orthonormal_range_basis(m, RankTolerance{1e-6});
}

// Orthogonal complement of span(v) in R^n.
inline Matrix complement(const Matrix& v, Eigen::Index n) {
  if (v.cols() == 0) return Matrix::Identity(n, n);
  return annihilator(v).transpose();
}

}  // namespace dobc::testing
