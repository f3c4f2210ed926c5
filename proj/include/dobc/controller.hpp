#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "matrix_kernels.hpp"

namespace dobc {

enum class ControllerMode { OpenLoop, Linear, Tracking, SlidingIdeal, SlidingAdaptive };

inline const char* to_string(ControllerMode m) {
  switch (m) {
    case ControllerMode::OpenLoop: return "open_loop";
    case ControllerMode::Linear: return "linear";
    case ControllerMode::Tracking: return "tracking";
    case ControllerMode::SlidingIdeal: return "sliding_ideal";
    case ControllerMode::SlidingAdaptive: return "sliding_adaptive";
  }
  return "?";
}

inline ControllerMode controller_mode_from_string(const std::string& s) {
  for (auto m : {ControllerMode::OpenLoop, ControllerMode::Linear, ControllerMode::Tracking,
                 ControllerMode::SlidingIdeal, ControllerMode::SlidingAdaptive})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown controller mode '" + s + "'");
}

// a * sin(w t + phase)
struct Sinusoid {
  double amplitude = 1.0;
  double frequency = 1.0;
  double phase = 0.0;
  double operator()(double t) const { return amplitude * std::sin(frequency * t + phase); }
  bool operator==(const Sinusoid&) const = default;
};

// One sinusoid per input component; an empty signal is zero.
struct Signal {
  std::vector<Sinusoid> parts;
  Vector operator()(double t, Eigen::Index dim) const {
    Vector out = Vector::Zero(dim);
    for (std::size_t k = 0; k < parts.size() && Eigen::Index(k) < dim; ++k) out(k) = parts[k](t);
    return out;
  }
  bool operator==(const Signal&) const = default;
};

struct SlidingParams {
  Matrix p;              // Lyapunov certificate of A + B K
  double beta = 0.1;     // fixed gain (ideal) or initial gain (adaptive)
  double epsilon = 0.2;  // boundary-layer width
  double sigma = 0.1;
  double phi = 5.0;
};

struct ControllerNode {
  std::size_t index = 0;
  ControllerMode mode = ControllerMode::Linear;
  Matrix channel;  // B^iota, n x m
  Matrix k;        // m x n
  std::size_t source = 0;  // observer whose estimate feeds this controller
  Signal signal;           // reference (tracking) or the input itself (open loop)
  SlidingParams sliding;

  Eigen::Index inputs() const { return channel.cols(); }
};

inline Vector linear_feedback(const ControllerNode& c, const Vector& xhat) { return c.k * xhat; }

inline Vector tracking_feedback(const ControllerNode& c, const Vector& xhat, double t) {
  return c.k * xhat + c.signal(t, c.inputs());
}

inline Vector sliding_ideal(const ControllerNode& c, const Vector& xhat) {
  Vector w = c.channel.transpose() * c.sliding.p * xhat;
  double nrm = w.norm();
  Vector dir = nrm < 1e-12 ? Vector::Zero(w.size()) : Vector(w / nrm);
  return c.k * xhat - c.sliding.beta * dir;
}

// omega/||omega|| outside the layer beta ||omega|| > eps, (beta/eps) omega inside.
inline Vector boundary_layer_direction(const Vector& w, double beta, double eps) {
  double nrm = w.norm();
  if (beta * nrm > eps) return w / nrm;
  return (beta / eps) * w;
}

struct ControlOutput {
  Vector u;
  double dbeta = 0.0;
};

inline ControlOutput sliding_adaptive_rhs(const ControllerNode& c, const Vector& xhat, double beta) {
  Vector w = c.channel.transpose() * c.sliding.p * xhat;
  ControlOutput out;
  out.u = c.k * xhat - beta * boundary_layer_direction(w, beta, c.sliding.epsilon);
  out.dbeta = -c.sliding.sigma * beta + c.sliding.phi * w.norm();
  return out;
}

inline ControlOutput control(const ControllerNode& c, double t, const Vector& xhat, double beta) {
  switch (c.mode) {
    case ControllerMode::OpenLoop: return {c.signal(t, c.inputs()), 0.0};
    case ControllerMode::Linear: return {linear_feedback(c, xhat), 0.0};
    case ControllerMode::Tracking: return {tracking_feedback(c, xhat, t), 0.0};
    case ControllerMode::SlidingIdeal: return {sliding_ideal(c, xhat), 0.0};
    case ControllerMode::SlidingAdaptive: return sliding_adaptive_rhs(c, xhat, beta);
  }
  return {};
}

// x_r' = A x_r + sum B^iota (K^iota x_r + r^iota(t)), r = 0 outside tracking mode.
inline Vector reference_rhs(const Matrix& a, const std::vector<ControllerNode>& ctrls, const Vector& xr, double t) {
  Vector dx = a * xr;
  for (const auto& c : ctrls) {
    if (c.mode == ControllerMode::OpenLoop) continue;
    Vector u = c.k * xr;
    if (c.mode == ControllerMode::Tracking) u += c.signal(t, c.inputs());
    dx += c.channel * u;
  }
  return dx;
}

// v' = S v with v(0) = v0, entering the plant through b_v.
struct UnknownInputModel {
  Matrix s;
  Vector v0;
  Matrix b_v;
  Eigen::Index dim() const { return v0.size(); }
};

inline Vector unknown_input_value(const UnknownInputModel& m, double t) { return (m.s * t).exp() * m.v0; }

// sup_t ||v(t)||; closed form for a skew-symmetric generator.
inline double unknown_input_bound(const UnknownInputModel& m) {
  if ((m.s + m.s.transpose()).norm() > 1e-12)
    throw PreconditionViolated("unknown input generator is not skew-symmetric; no uniform bound available");
  return m.v0.norm();
}

// X_v with B X_v = B_v (matching condition).
inline Matrix matched_witness(const Matrix& b, const Matrix& b_v, double tol = 1e-9) {
  Matrix xv = b.colPivHouseholderQr().solve(b_v);
  if ((b * xv - b_v).norm() > tol * std::max(1.0, b_v.norm()))
    throw PreconditionViolated("unknown input is not matched: B_v is not in the range of B");
  return xv;
}

// beta >= vbar ||X_v|| (B tilde = I)
inline double sliding_gain_bound(const Matrix& b, const UnknownInputModel& m) {
  Matrix xv = matched_witness(b, m.b_v);
  Eigen::JacobiSVD<Matrix> svd(xv);
  return unknown_input_bound(m) * svd.singularValues()(0);
}

// P > 0 and (A+BK)^T P + P (A+BK) < 0
inline bool sliding_certificate_holds(const Matrix& a_cl, const Matrix& p) {
  Eigen::SelfAdjointEigenSolver<Matrix> ep(0.5 * (p + p.transpose()), Eigen::EigenvaluesOnly);
  Matrix lyap = a_cl.transpose() * p + p * a_cl;
  Eigen::SelfAdjointEigenSolver<Matrix> el(0.5 * (lyap + lyap.transpose()), Eigen::EigenvaluesOnly);
  return ep.eigenvalues().minCoeff() > 0 && el.eigenvalues().maxCoeff() < 0;
}

}  // namespace dobc
