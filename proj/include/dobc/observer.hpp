#pragma once

#include <complex>
#include <limits>
#include <vector>

#include "graph.hpp"
#include "strong_detectability.hpp"

namespace dobc {

// Adaptive consensus gains of one node: gamma drives the linear term, gamma_s the
// discontinuous one. sigma > 0 adds leakage.
struct AdaptiveGains {
  double gamma0 = 0.1;
  double gamma_s0 = 0.1;
  double phi = 0.2;
  double phi_s = 0.5;
  double sigma = 0.0;
  double sigma_s = 0.0;

  void validate() const {
    if (gamma0 < 0 || gamma_s0 < 0) throw ConfigError("observer gains: initial gains must be nonnegative");
    if (phi < 0 || phi_s < 0) throw ConfigError("observer gains: adaptation rates must be nonnegative");
    if (sigma < 0 || sigma_s < 0) throw ConfigError("observer gains: leakage must be nonnegative");
  }
};

struct ObserverNode {
  std::size_t index = 0;
  Quadruplet quad;
  Matrix c;    // local output matrix
  Matrix b;    // locally known input channels
  Matrix t_u;  // complement of quad.t
  Matrix e_bar, f_bar, g_bar, b_bar;
  AdaptiveGains gains;

  Eigen::Index state_dim() const { return e_bar.rows(); }
};

struct ObserverState {
  Vector z;
  double gamma = 0.0;
  double gamma_s = 0.0;
};

struct ObserverDerivative {
  Vector dz;
  double dgamma = 0.0;
  double dgamma_s = 0.0;
};

// Full-state observer gains from a local quadruplet.
inline ObserverNode make_observer_node(std::size_t index, const Matrix& a, const Matrix& b_i, const Matrix& c_i,
                                       const Quadruplet& q, const AdaptiveGains& gains) {
  const Eigen::Index n = a.rows();
  if (b_i.rows() != n || c_i.cols() != n || q.t.rows() != n)
    throw DimensionMismatch("observer: dimensions do not match the plant");
  gains.validate();
  ObserverNode node;
  node.index = index;
  node.quad = q;
  node.c = c_i;
  node.b = b_i;
  node.gains = gains;
  node.t_u = annihilator(q.t).transpose();
  Matrix pu = node.t_u * node.t_u.transpose();
  node.g_bar = q.t * q.g;
  node.e_bar = q.t * q.e * q.t.transpose() + pu * a;
  node.f_bar = q.t * q.f + pu * a * node.g_bar;
  node.b_bar = (Matrix::Identity(n, n) - node.g_bar * c_i) * b_i;
  return node;
}

inline ObserverNode build_observer(std::size_t index, const Matrix& a, const Matrix& b_i, const Matrix& b_minus,
                                   const Matrix& c_i, const AdaptiveGains& gains,
                                   const DecomposeOptions& opt = {}) {
  return make_observer_node(index, a, b_i, c_i, decompose(a, b_minus, c_i, opt), gains);
}

// w / ||w||, with a dead zone below 1e-12 so h(0) = 0.
inline Vector sign_direction(const Vector& w) {
  double nrm = w.norm();
  if (nrm < 1e-12) return Vector::Zero(w.size());
  return w / nrm;
}

inline ObserverState initial_state(const ObserverNode& node) {
  return {Vector::Zero(node.state_dim()), node.gains.gamma0, node.gains.gamma_s0};
}

inline Vector estimate(const ObserverNode& node, const Vector& z, const Vector& y) {
  return z + node.g_bar * y;
}

// d_i = sum_j a_ij (xhat_i - xhat_j)
inline Vector disagreement(const CommGraph& graph, std::size_t i, const std::vector<Vector>& estimates) {
  const Matrix& adj = graph.adjacency();
  Vector d = Vector::Zero(estimates[i].size());
  for (std::size_t j = 0; j < graph.size(); ++j)
    if (adj(i, j) != 0) d += adj(i, j) * (estimates[i] - estimates[j]);
  return d;
}

inline ObserverDerivative observer_rhs(const ObserverNode& node, const ObserverState& s, const Vector& y,
                                       const Vector& u, const Vector& d) {
  Vector eps = node.t_u.transpose() * d;
  double en = eps.norm();
  Vector inject = s.gamma * (node.t_u * eps) + s.gamma_s * (node.t_u * sign_direction(eps));
  ObserverDerivative out;
  out.dz = node.e_bar * s.z + node.f_bar * y - inject;
  if (node.b_bar.cols()) out.dz += node.b_bar * u;
  out.dgamma = -node.gains.sigma * s.gamma + node.gains.phi * en * en;
  out.dgamma_s = -node.gains.sigma_s * s.gamma_s + node.gains.phi_s * en;
  return out;
}

// PBH test: rank [A - lambda I; C] = n for every eigenvalue with Re >= 0.
inline bool is_detectable(const Matrix& a, const Matrix& c, RankTolerance tol = {}) {
  const Eigen::Index n = a.rows();
  if (n == 0) return true;
  Eigen::EigenSolver<Matrix> es(a, false);
  for (Eigen::Index k = 0; k < n; ++k) {
    std::complex<double> lam = es.eigenvalues()(k);
    if (lam.real() < -1e-9) continue;
    Eigen::MatrixXcd pbh(n + c.rows(), n);
    pbh << a.cast<std::complex<double>>() - lam * Eigen::MatrixXcd::Identity(n, n), c.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
    const Vector s = svd.singularValues();
    double thr = tol.relative * std::max(1.0, s(0)) * 1e3;  // eigenvalues carry ~1e-12 error
    if (s(n - 1) <= thr) return false;
  }
  return true;
}

// One agent of a heterogeneous multi-agent system.
struct Agent {
  Matrix a, b, c;
};

struct InjectionDesign {
  Matrix x;
  Matrix l;
  double rho = 1.0;
  double transient_gain = 1.0;  // of A + L C
  double residual = 0.0;        // of the Riccati equation
};

// L = -rho X C^T with X from the observer-form Riccati equation for (A, sqrt(rho) C), Q = I.
inline InjectionDesign mas_injection(const Agent& ag, double shift, double rho = 1.0) {
  if (!is_detectable(ag.a, ag.c)) throw NotDetectable("agent pair (A, C) is not detectable");
  const Eigen::Index n = ag.a.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix cw = std::sqrt(rho) * ag.c;
  InjectionDesign d;
  d.rho = rho;
  d.x = solve_care(ag.a, cw, id, shift, CareForm::Observer);
  d.l = -rho * d.x * ag.c.transpose();
  d.transient_gain = detail::transient_gain(ag.a + d.l * ag.c);
  Matrix as = ag.a + shift * id;
  d.residual = (as * d.x + d.x * as.transpose() - d.x * cw.transpose() * cw * d.x + id).norm();
  return d;
}

// Walks the rho ladder like the decomposition does: first design with transient gain
// within the limit, otherwise the smallest gain seen.
inline InjectionDesign mas_injection_ladder(const Agent& ag, double shift, const DecomposeOptions& opt = {}) {
  InjectionDesign best;
  best.transient_gain = std::numeric_limits<double>::infinity();
  for (double rho : opt.rho_ladder) {
    InjectionDesign d = mas_injection(ag, shift, rho);
    if (d.transient_gain < best.transient_gain) best = d;
    if (d.transient_gain <= opt.max_transient_gain) break;
  }
  return best;
}

inline Matrix mas_injection_gain(const Agent& ag, double shift) { return mas_injection(ag, shift).l; }

// Quadruplet of a local Luenberger observer for the block of agent k inside the stacked state.
inline Quadruplet mas_quadruplet(Eigen::Index offset, Eigen::Index n_total, const Agent& ag, const Matrix& l) {
  const Eigen::Index ni = ag.a.rows();
  Quadruplet q;
  q.t = Matrix::Zero(n_total, ni);
  q.t.block(offset, 0, ni, ni).setIdentity();
  q.e = ag.a + l * ag.c;
  q.f = -l;
  q.g = Matrix::Zero(ni, ag.c.rows());
  q.mode = EMode::Stable;
  q.transient_gain = detail::transient_gain(q.e);
  return q;
}

// Observer network of a heterogeneous multi-agent system embedded block-diagonally;
// node i estimates the stacked state using its own agent's output and input.
inline std::vector<ObserverNode> build_mas_observer(const std::vector<Agent>& agents, const std::vector<Matrix>& l,
                                                    const AdaptiveGains& gains) {
  if (agents.size() != l.size()) throw DimensionMismatch("build_mas_observer: one gain per agent");
  std::vector<Matrix> blocks;
  for (const auto& ag : agents) {
    if (!is_detectable(ag.a, ag.c)) throw NotDetectable("agent pair (A, C) is not detectable");
    blocks.push_back(ag.a);
  }
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.rows();
  Matrix a = Matrix::Zero(n, n);
  std::vector<ObserverNode> nodes;
  Eigen::Index off = 0;
  for (const auto& ag : agents) {
    a.block(off, off, ag.a.rows(), ag.a.rows()) = ag.a;
    off += ag.a.rows();
  }
  off = 0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const Agent& ag = agents[i];
    const Eigen::Index ni = ag.a.rows();
    Matrix b = Matrix::Zero(n, ag.b.cols());
    b.middleRows(off, ni) = ag.b;
    Matrix c = Matrix::Zero(ag.c.rows(), n);
    c.middleCols(off, ni) = ag.c;
    nodes.push_back(make_observer_node(i, a, b, c, mas_quadruplet(off, n, ag, l[i]), gains));
    off += ni;
  }
  return nodes;
}

}  // namespace dobc
