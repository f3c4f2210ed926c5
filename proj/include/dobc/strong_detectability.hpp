#pragma once

#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "matrix_kernels.hpp"

namespace dobc {

enum class EMode { Stable, Zero };

inline const char* to_string(EMode m) { return m == EMode::Stable ? "stable" : "zero"; }

// Functional observer data: xi' = E xi + F y, estimate T^T x ~ xi + G y.
struct Quadruplet {
  Matrix t;  // n x delta, orthonormal columns
  Matrix e;
  Matrix f;
  Matrix g;
  EMode mode = EMode::Zero;
  double rho = 0.0;             // output weight used for the injection gain (0 in zero mode)
  double transient_gain = 1.0;  // sup_t ||exp(E t)|| exp(-alpha t)
  Eigen::Index delta() const { return t.cols(); }
};

struct DecomposeOptions {
  RankTolerance rank{};
  std::vector<double> rho_ladder{1.0, 10.0, 100.0, 1000.0};
  double max_transient_gain = 2.0;
};

namespace detail {

// Largest P3-invariant subspace inside ker(P4), orthonormal columns.
inline Matrix unobservable_subspace(const Matrix& a, const Matrix& c, RankTolerance tol) {
  const Eigen::Index n = a.rows();
  Matrix v = null_space(c, tol);
  while (v.cols() > 0) {
    Matrix w = a * v - v * (v.transpose() * a * v);
    Matrix keep = null_space(w, tol);
    if (keep.cols() == v.cols()) break;
    v = v * keep;
  }
  if (v.rows() != n) v.resize(n, 0);
  return v;
}

// Real orthonormal basis of the invariant subspace of m belonging to eigenvalues
// with nonnegative real part. Nearby eigenvalues are grouped and a group is
// classified by its centroid, so a defective eigenvalue split by round-off is
// never torn apart.
inline Matrix unstable_invariant_subspace(const Matrix& m) {
  using Complex = std::complex<double>;
  const Eigen::Index n = m.rows();
  if (n == 0) return Matrix(0, 0);
  Eigen::ComplexSchur<Matrix> schur(m);
  Eigen::MatrixXcd t = schur.matrixT();
  Eigen::MatrixXcd u = schur.matrixU();

  // spectral radius, not ||m||: a badly scaled block (large zero near infinity)
  // would otherwise merge well separated modes
  const double scale = std::max(1.0, t.diagonal().cwiseAbs().maxCoeff());
  const double radius = 1e-3 * scale;
  const double marginal = 1e-9 * std::max(1.0, m.norm());

  std::vector<Eigen::Index> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](Eigen::Index i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (std::abs(t(i, i) - t(j, j)) < radius) parent[find(i)] = find(j);

  std::vector<Complex> sum(n, 0.0);
  std::vector<int> count(n, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    sum[find(i)] += t(i, i);
    ++count[find(i)];
  }
  std::vector<bool> unstable(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto root = find(i);
    unstable[i] = (sum[root] / double(count[root])).real() >= -marginal;
  }

  // bubble unstable eigenvalues to the top with Givens swaps
  bool moved = true;
  while (moved) {
    moved = false;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      if (unstable[k] || !unstable[k + 1]) continue;
      Complex a = t(k, k), b = t(k, k + 1), c = t(k + 1, k + 1);
      Eigen::Vector2cd x(b, c - a);
      x /= x.norm();
      Eigen::Matrix2cd g;
      g << x(0), -std::conj(x(1)), x(1), std::conj(x(0));
      t.middleRows(k, 2) = g.adjoint() * t.middleRows(k, 2);
      t.middleCols(k, 2) = t.middleCols(k, 2) * g;
      u.middleCols(k, 2) = u.middleCols(k, 2) * g;
      t(k + 1, k) = 0.0;
      std::swap(unstable[k], unstable[k + 1]);
      moved = true;
    }
  }
  Eigen::Index ku = std::count(unstable.begin(), unstable.end(), true);
  if (ku == 0) return Matrix(n, 0);
  Matrix parts(n, 2 * ku);
  parts << u.leftCols(ku).real(), u.leftCols(ku).imag();
  Eigen::JacobiSVD<Matrix> svd(parts, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(ku);
}

inline double transient_gain(const Matrix& e) {
  if (e.rows() == 0) return 1.0;
  double alpha = spectral_abscissa(e);
  if (alpha >= 0) return std::numeric_limits<double>::infinity();
  const int samples = 400;
  const double horizon = 12.0 / std::abs(alpha);
  double worst = 1.0;
  for (int k = 1; k <= samples; ++k) {
    double t = horizon * k / samples;
    Matrix et = (e * t).exp();
    Eigen::JacobiSVD<Matrix> svd(et);
    worst = std::max(worst, svd.singularValues()(0) * std::exp(-alpha * t));
  }
  return worst;
}

inline Quadruplet finish(const Matrix& t0t, const Matrix& e0, const Matrix& k0, Eigen::Index p,
                         EMode mode, RankTolerance tol) {
  RowspaceBasis basis = gram_schmidt_rowspace(t0t, tol);
  Quadruplet q;
  q.t = basis.t;
  q.mode = mode;
  const Matrix& tt = basis.t_tilde;
  Matrix tt_inv = tt.inverse();
  q.e = tt * e0 * tt_inv;
  q.g = tt * k0.rightCols(p);
  q.f = q.e * q.g + tt * k0.leftCols(p);
  return q;
}

inline Quadruplet zero_branch(const Matrix& c, RankTolerance tol) {
  const Eigen::Index p = c.rows();
  Matrix k0(p, 2 * p);
  k0 << Matrix::Zero(p, p), Matrix::Identity(p, p);
  return finish(c, Matrix::Zero(p, p), k0, p, EMode::Zero, tol);
}

// Output injection for eta' = P3d eta + J2 (P4d eta - y): picks the first weight on the
// ladder whose error dynamics stay within the allowed transient gain.
struct Injection {
  Matrix j2;
  Matrix e0;
  double rho;
};

inline Injection choose_injection(const Matrix& p3d, const Matrix& p4d, const Matrix& t0t,
                                  const DecomposeOptions& opt) {
  const Eigen::Index rd = p3d.rows();
  RowspaceBasis basis = gram_schmidt_rowspace(t0t, opt.rank);
  Matrix tt_inv = basis.t_tilde.inverse();
  Injection best;
  double best_gain = std::numeric_limits<double>::infinity();
  for (double rho : opt.rho_ladder) {
    Matrix cw = std::sqrt(rho) * p4d;
    Matrix x = solve_care(p3d, cw, Matrix::Identity(rd, rd), 0.0, CareForm::Observer);
    Matrix j2 = -rho * x * p4d.transpose();
    Matrix e0 = p3d + j2 * p4d;
    double gain = transient_gain(basis.t_tilde * e0 * tt_inv);
    if (gain < best_gain) {
      best_gain = gain;
      best = {j2, e0, rho};
    }
    if (gain <= opt.max_transient_gain) break;
  }
  return best;
}

}  // namespace detail

// Orthogonal P = [Q_d V_u] where V_u spans the unobservable modes of (p3, p4) with
// Re >= 0. r_d = number of columns of Q_d.
struct DetectabilitySplit {
  Matrix p_pi;
  Eigen::Index r_d = 0;
};

inline DetectabilitySplit detectability_decomposition(const Matrix& p3, const Matrix& p4,
                                                      RankTolerance tol = {}) {
  const Eigen::Index n = p3.rows();
  if (p3.cols() != n || p4.cols() != n) throw DimensionMismatch("detectability_decomposition: shapes");
  Matrix v = detail::unobservable_subspace(p3, p4, tol);
  DetectabilitySplit out;
  if (v.cols() == 0) {
    out.p_pi = Matrix::Identity(n, n);
    out.r_d = n;
    return out;
  }
  Matrix vu = v * detail::unstable_invariant_subspace(v.transpose() * p3 * v);
  Matrix qd = annihilator(vu, tol).transpose();
  out.p_pi.resize(n, n);
  out.p_pi << qd, vu;
  out.r_d = qd.cols();
  return out;
}

// Maximal functional T^T x that can be estimated from y = C x with the unknown
// input entering through B_minus, together with an observer quadruplet for it.
inline Quadruplet decompose(const Matrix& a, const Matrix& b_minus, const Matrix& c,
                            const DecomposeOptions& opt = {}) {
  const Eigen::Index n = a.rows(), m = b_minus.cols(), p = c.rows();
  const RankTolerance tol = opt.rank;
  if (a.cols() != n) throw DimensionMismatch("decompose: A is not square");
  if (b_minus.rows() != n) throw DimensionMismatch("decompose: B_minus rows differ from A");
  if (c.cols() != n) throw DimensionMismatch("decompose: C columns differ from A");
  if (numerical_rank(c, tol) != p) throw RankDeficient("decompose: C must have full row rank");
  if (numerical_rank(b_minus, tol) != m) throw RankDeficient("decompose: B_minus must have full column rank");

  auto stable_branch = [&](const Matrix& p3, const Matrix& p4, const DetectabilitySplit& split,
                           auto&& t0t_of, auto&& k0_of) {
    const Eigen::Index rd = split.r_d;
    Matrix rot = split.p_pi.transpose() * p3 * split.p_pi;
    Matrix p3d = rot.topLeftCorner(rd, rd);
    Matrix p4d = (p4 * split.p_pi).leftCols(rd);
    Matrix j1 = split.p_pi.leftCols(rd).transpose();
    Matrix t0t = t0t_of(j1);
    detail::Injection inj = detail::choose_injection(p3d, p4d, t0t, opt);
    Quadruplet q = detail::finish(t0t, inj.e0, k0_of(j1, inj.j2, t0t), p, EMode::Stable, tol);
    q.rho = inj.rho;
    q.transient_gain = detail::transient_gain(q.e);
    return q;
  };

  if (m == 0) {
    DetectabilitySplit split = detectability_decomposition(a, c, tol);
    if (split.r_d <= p) return detail::zero_branch(c, tol);
    return stable_branch(
        a, c, split, [](const Matrix& j1) { return j1; },
        [&](const Matrix&, const Matrix& j2, const Matrix&) {
          Matrix k0(j2.rows(), 2 * p);
          k0 << -j2, Matrix::Zero(j2.rows(), p);
          return k0;
        });
  }

  // Step 1: normalize [0; C B_minus]
  Matrix stacked_b(2 * p, m);
  stacked_b << Matrix::Zero(p, m), c * b_minus;
  RankFactorization f0 = rank_factorization(stacked_b, tol);
  const Eigen::Index r = f0.rank;
  Matrix lam = b_minus * f0.psi;
  Matrix lam11 = lam.leftCols(r), lam12 = lam.rightCols(m - r);
  Matrix stacked_c(2 * p, n);
  stacked_c << c, c * a;
  Matrix pi = f0.phi * stacked_c;
  Matrix pi1 = pi.topRows(r), pi2 = pi.bottomRows(2 * p - r);

  // Steps 2-3
  Matrix xi1 = annihilator(lam12, tol);
  const Eigen::Index r1 = xi1.rows();
  Matrix range12 = orthonormal_range_basis(lam12, tol);
  Matrix psi1(n, r1 + range12.cols());
  psi1 << xi1.transpose(), range12;
  Matrix top = xi1 * (a - lam11 * pi1);
  Matrix mstack(top.rows() + pi2.rows(), n);
  mstack << top, -pi2;
  Matrix mm = mstack * psi1;
  Matrix lam21 = mm.leftCols(r1), lam22 = mm.rightCols(mm.cols() - r1);
  Matrix xi2 = annihilator(lam22, tol);
  Matrix xi21 = xi2.leftCols(r1), xi22 = xi2.rightCols(xi2.cols() - r1);

  // Steps 4-5: peel off directions until Xi_{j,1} has full column rank
  std::vector<Matrix> xis{xi2};
  std::vector<Matrix> phis;
  Matrix lj1 = lam21;
  Eigen::Index r_prev = r1;
  Matrix p3, p4;
  for (Eigen::Index guard = 0;; ++guard) {
    if (guard > n + 1) throw std::logic_error("decompose: recursion did not terminate");
    const Matrix& xij = xis.back();
    Matrix xj1 = xij.leftCols(r_prev);
    if (xj1.rows() == 0 || xj1.cols() == 0 || numerical_rank(xj1, tol) == 0)
      return detail::zero_branch(c, tol);
    if (numerical_rank(xj1, tol) == r_prev) {
      Matrix ann = annihilator(xj1, tol);
      Matrix phij(r_prev + ann.rows(), xj1.rows());
      phij << pseudo_inverse(xj1, tol), ann;
      phis.push_back(phij);
      Matrix s = phij * xij * lj1;
      p3 = s.topRows(r_prev);
      p4 = s.bottomRows(s.rows() - r_prev);
      break;
    }
    RankFactorization fj = rank_factorization(xj1, tol);
    phis.push_back(fj.phi);
    Matrix s = fj.phi * xij * lj1 * fj.psi;
    lj1 = s.leftCols(fj.rank);
    xis.push_back(annihilator(s.rightCols(s.cols() - fj.rank), tol));
    r_prev = fj.rank;
  }

  // Step 6
  DetectabilitySplit split = detectability_decomposition(p3, p4, tol);
  if (split.r_d <= p) return detail::zero_branch(c, tol);

  // Phi = Phi_j Xi_j ... Phi_3 Xi_3 Phi_2
  Matrix phi = phis[0];
  for (std::size_t k = 1; k < phis.size(); ++k) phi = phis[k] * xis[k] * phi;
  const Eigen::Index rj = p3.rows();
  Matrix w = phi * xi21 * xi1;
  Matrix w22 = phi * xi22;

  // Step 7: only the top r_j rows of Phi Xi21 Xi1 survive, so T0^T depends on J1 alone.
  return stable_branch(
      p3, p4, split, [&](const Matrix& j1) -> Matrix { return j1 * w.topRows(rj); },
      [&](const Matrix& j1, const Matrix& j2, const Matrix& t0t) {
        Matrix jj(j1.rows(), j1.cols() + j2.cols());
        jj << j1, j2;
        Matrix left = t0t * lam11;
        Matrix right = jj * w22;
        Matrix k0(left.rows(), left.cols() + right.cols());
        k0 << left, right;
        return Matrix(k0 * f0.phi);
      });
}

struct CertificateCheck {
  std::string name;
  double residual = 0.0;
  bool passed = false;
};

struct QuadrupletReport {
  std::vector<CertificateCheck> checks;
  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

inline QuadrupletReport verify_quadruplet(const Matrix& a, const Matrix& b_minus, const Matrix& c,
                                          const Quadruplet& q, double tol = 1e-8) {
  const Eigen::Index n = a.rows(), d = q.t.cols();
  QuadrupletReport rep;
  auto add = [&](std::string name, double r) { rep.checks.push_back({std::move(name), r, r < tol}); };
  Matrix tu = annihilator(q.t).transpose();
  const Matrix id = Matrix::Identity(n, n);
  add("orthonormality", (q.t.transpose() * q.t - Matrix::Identity(d, d)).norm());
  add("complement_orthogonality", (tu.transpose() * q.t).norm());
  add("complement_orthonormality", (tu.transpose() * tu - Matrix::Identity(tu.cols(), tu.cols())).norm());
  add("projector_completeness", (q.t * q.t.transpose() + tu * tu.transpose() - id).norm());
  add("input_decoupling", b_minus.cols() ? (q.g * c * b_minus - q.t.transpose() * b_minus).norm() : 0.0);
  add("sylvester", (q.e * q.t.transpose() + (q.g * c - q.t.transpose()) * a + (q.f - q.e * q.g) * c).norm());
  if (q.mode == EMode::Stable) {
    double alpha = spectral_abscissa(q.e);
    rep.checks.push_back({"stability", alpha, alpha < 0});
  } else {
    add("zero_mode", q.e.norm() + q.f.norm() + (q.g * c - q.t.transpose()).norm());
  }
  return rep;
}

}  // namespace dobc
