#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "controller.hpp"
#include "graph.hpp"
#include "observer.hpp"
#include "rk4.hpp"

namespace dobc {

// Plant x' = A x + sum B^iota u^iota + B_v v, observed by a network of nodes and
// driven by a bank of controllers.
struct ClosedLoop {
  Matrix a;
  Vector x0;
  std::optional<UnknownInputModel> unknown_input;
  std::vector<ControllerNode> controllers;
  std::vector<ObserverNode> observers;
  std::vector<std::vector<std::size_t>> observer_inputs;  // controllers whose inputs node i knows
  CommGraph graph;

  bool tracks_reference() const {
    for (const auto& c : controllers)
      if (c.mode == ControllerMode::Tracking) return true;
    return false;
  }
};

// Offsets of each block inside the flat state vector.
struct StateLayout {
  Eigen::Index n = 0, nodes = 0, ctrls = 0, mv = 0;
  bool reference = false;
  Eigen::Index x = 0, xr = 0, v = 0, z = 0, gamma = 0, gamma_s = 0, beta = 0, size = 0;

  explicit StateLayout(const ClosedLoop& loop)
      : n(loop.a.rows()),
        nodes(Eigen::Index(loop.observers.size())),
        ctrls(Eigen::Index(loop.controllers.size())),
        mv(loop.unknown_input ? loop.unknown_input->dim() : 0),
        reference(loop.tracks_reference()) {
    xr = x + n;
    v = xr + (reference ? n : 0);
    z = v + mv;
    gamma = z + nodes * n;
    gamma_s = gamma + nodes;
    beta = gamma_s + nodes;
    size = beta + ctrls;
  }
};

struct ClosedLoopState {
  double t = 0.0;
  Vector data;
};

struct Evaluation {
  Vector deriv;
  std::vector<Vector> u;     // per controller
  std::vector<Vector> xhat;  // per observer
  std::vector<double> eps_u;
};

struct Sample {
  double t = 0.0;
  double norm_x = 0.0;
  double err_r = 0.0;  // ||x - x_r||, x_r = 0 without a reference
  std::vector<double> err, eps_u, eps_d, gamma, gamma_s, beta, u;
};

struct TrajectoryRecord {
  std::size_t nodes = 0, controllers = 0;
  std::vector<std::string> u_labels;
  std::vector<std::size_t> u_widths;  // inputs per controller
  std::vector<Sample> samples;
  std::vector<double> u_variation;  // total variation of each controller's u, every step
  double horizon = 0.0;
  double step = 0.0;
};

struct RunOptions {
  double horizon = 30.0;
  double step = 1e-3;
  std::size_t stride = 100;
  double divergence_limit = 1e9;
};

class Simulator {
 public:
  explicit Simulator(ClosedLoop loop) : loop_(std::move(loop)), layout_(loop_) {
    const Eigen::Index n = loop_.a.rows();
    if (loop_.a.cols() != n || loop_.x0.size() != n) throw DimensionMismatch("simulator: plant dimensions");
    if (loop_.observer_inputs.size() != loop_.observers.size())
      throw DimensionMismatch("simulator: one input list per observer");
    if (loop_.graph.size() != loop_.observers.size())
      throw DimensionMismatch("simulator: graph size differs from the number of observers");
    for (const auto& c : loop_.controllers) {
      if (c.channel.rows() != n) throw DimensionMismatch("simulator: controller channel rows");
      if (c.mode != ControllerMode::OpenLoop && c.source >= loop_.observers.size())
        throw DimensionMismatch("simulator: controller source observer out of range");
    }
    for (std::size_t i = 0; i < loop_.observers.size(); ++i)
      for (auto k : loop_.observer_inputs[i])
        if (k >= loop_.controllers.size()) throw DimensionMismatch("simulator: observer input out of range");
  }

  const ClosedLoop& loop() const { return loop_; }
  const StateLayout& layout() const { return layout_; }

  ClosedLoopState initial_state() const {
    ClosedLoopState s;
    s.data = Vector::Zero(layout_.size);
    s.data.segment(layout_.x, layout_.n) = loop_.x0;
    if (loop_.unknown_input) s.data.segment(layout_.v, layout_.mv) = loop_.unknown_input->v0;
    for (Eigen::Index i = 0; i < layout_.nodes; ++i) {
      s.data(layout_.gamma + i) = loop_.observers[i].gains.gamma0;
      s.data(layout_.gamma_s + i) = loop_.observers[i].gains.gamma_s0;
    }
    for (Eigen::Index k = 0; k < layout_.ctrls; ++k) {
      const auto& c = loop_.controllers[k];
      bool sliding = c.mode == ControllerMode::SlidingIdeal || c.mode == ControllerMode::SlidingAdaptive;
      s.data(layout_.beta + k) = sliding ? c.sliding.beta : 0.0;
    }
    return s;
  }

  Evaluation evaluate(double t, const Vector& s) const {
    const auto& L = layout_;
    const Eigen::Index n = L.n;
    Evaluation ev;
    ev.deriv = Vector::Zero(L.size);
    Vector x = s.segment(L.x, n);

    std::vector<Vector> ys;
    for (Eigen::Index i = 0; i < L.nodes; ++i) {
      const auto& node = loop_.observers[i];
      ys.push_back(node.c * x);
      ev.xhat.push_back(estimate(node, s.segment(L.z + i * n, n), ys.back()));
    }

    Vector dx = loop_.a * x;
    for (Eigen::Index k = 0; k < L.ctrls; ++k) {
      const auto& c = loop_.controllers[k];
      const Vector& xh = c.mode == ControllerMode::OpenLoop ? x : ev.xhat[c.source];
      ControlOutput out = control(c, t, xh, s(L.beta + k));
      ev.deriv(L.beta + k) = out.dbeta;
      dx += c.channel * out.u;
      ev.u.push_back(std::move(out.u));
    }
    if (loop_.unknown_input) {
      const auto& ui = *loop_.unknown_input;
      Vector v = s.segment(L.v, L.mv);
      dx += ui.b_v * v;
      ev.deriv.segment(L.v, L.mv) = ui.s * v;
    }
    ev.deriv.segment(L.x, n) = dx;
    if (L.reference)
      ev.deriv.segment(L.xr, n) = reference_rhs(loop_.a, loop_.controllers, s.segment(L.xr, n), t);

    for (Eigen::Index i = 0; i < L.nodes; ++i) {
      const auto& node = loop_.observers[i];
      Eigen::Index m = 0;
      for (auto k : loop_.observer_inputs[i]) m += ev.u[k].size();
      Vector ui(m);
      m = 0;
      for (auto k : loop_.observer_inputs[i]) {
        ui.segment(m, ev.u[k].size()) = ev.u[k];
        m += ev.u[k].size();
      }
      Vector d = disagreement(loop_.graph, std::size_t(i), ev.xhat);
      ObserverState os{s.segment(L.z + i * n, n), s(L.gamma + i), s(L.gamma_s + i)};
      ObserverDerivative od = observer_rhs(node, os, ys[i], ui, d);
      ev.deriv.segment(L.z + i * n, n) = od.dz;
      ev.deriv(L.gamma + i) = od.dgamma;
      ev.deriv(L.gamma_s + i) = od.dgamma_s;
      ev.eps_u.push_back((node.t_u.transpose() * d).norm());
    }
    return ev;
  }

  ClosedLoopState step(const ClosedLoopState& s, double h) const {
    return step_with(s, h, evaluate(s.t, s.data).deriv);
  }

  TrajectoryRecord run(const RunOptions& opt) const {
    if (!(opt.step > 0) || opt.horizon < 0 || opt.stride == 0) throw ConfigError("run options: invalid step/horizon/stride");
    const auto steps = std::size_t(std::llround(opt.horizon / opt.step));
    TrajectoryRecord rec;
    rec.nodes = loop_.observers.size();
    rec.controllers = loop_.controllers.size();
    rec.horizon = double(steps) * opt.step;
    rec.step = opt.step;
    for (std::size_t k = 0; k < loop_.controllers.size(); ++k) {
      rec.u_widths.push_back(std::size_t(loop_.controllers[k].inputs()));
      for (Eigen::Index j = 0; j < loop_.controllers[k].inputs(); ++j)
        rec.u_labels.push_back("u_" + std::to_string(k + 1) + "_" + std::to_string(j + 1));
    }
    rec.u_variation.assign(rec.controllers, 0.0);

    ClosedLoopState s = initial_state();
    std::vector<Vector> prev_u;
    for (std::size_t k = 0;; ++k) {
      s.t = double(k) * opt.step;
      Evaluation ev = evaluate(s.t, s.data);
      if (!prev_u.empty())
        for (std::size_t c = 0; c < rec.controllers; ++c) rec.u_variation[c] += (ev.u[c] - prev_u[c]).lpNorm<1>();
      prev_u = ev.u;
      if (k % opt.stride == 0 || k == steps) rec.samples.push_back(sample(s, ev));
      if (k == steps) break;
      s = step_with(s, opt.step, ev.deriv);
      double worst = s.data.size() ? s.data.cwiseAbs().maxCoeff() : 0.0;
      if (!s.data.allFinite() || worst > opt.divergence_limit)
        throw Diverged(double(k + 1) * opt.step, "state magnitude exceeded the divergence limit");
    }
    return rec;
  }

 private:
  ClosedLoopState step_with(const ClosedLoopState& s, double h, const Vector& k1) const {
    auto f = [this](double t, const Vector& y) { return evaluate(t, y).deriv; };
    return {s.t + h, rk4_step(f, s.t, s.data, h, k1)};
  }

  Sample sample(const ClosedLoopState& s, const Evaluation& ev) const {
    const auto& L = layout_;
    Sample out;
    out.t = s.t;
    Vector x = s.data.segment(L.x, L.n);
    out.norm_x = x.norm();
    out.err_r = L.reference ? (x - s.data.segment(L.xr, L.n)).norm() : out.norm_x;
    for (Eigen::Index i = 0; i < L.nodes; ++i) {
      Vector e = ev.xhat[i] - x;
      out.err.push_back(e.norm());
      out.eps_u.push_back(ev.eps_u[i]);
      out.eps_d.push_back((loop_.observers[i].quad.t.transpose() * e).norm());
      out.gamma.push_back(s.data(L.gamma + i));
      out.gamma_s.push_back(s.data(L.gamma_s + i));
    }
    for (Eigen::Index k = 0; k < L.ctrls; ++k) {
      out.beta.push_back(s.data(L.beta + k));
      for (Eigen::Index j = 0; j < ev.u[k].size(); ++j) out.u.push_back(ev.u[k](j));
    }
    return out;
  }

  ClosedLoop loop_;
  StateLayout layout_;
};

// Fixed steps of size h from s.t up to t_end (rounded to whole steps).
inline ClosedLoopState advance(const Simulator& sim, ClosedLoopState s, double t_end, double h) {
  const double t0 = s.t;
  const auto steps = std::llround((t_end - t0) / h);
  for (long long k = 0; k < steps; ++k) {
    s = sim.step(s, h);
    s.t = t0 + double(k + 1) * h;
  }
  return s;
}

// ||y_h - y_{h/2}|| / ||y_{h/2} - y_{h/4}|| over [start, start + length]; about 16 for RK4.
inline double richardson_ratio(const Simulator& sim, const ClosedLoopState& start, double length, double h) {
  const double t1 = start.t + length;
  ClosedLoopState a = advance(sim, start, t1, h), b = advance(sim, start, t1, h / 2), c = advance(sim, start, t1, h / 4);
  return (a.data - b.data).norm() / (b.data - c.data).norm();
}

// Linear interpolation at the last downward crossing; +inf if the final value is
// still above the threshold, 0 if it never exceeds it.
inline double settling_time(const std::vector<double>& t, const std::vector<double>& v, double threshold) {
  if (t.empty() || v.back() >= threshold) return std::numeric_limits<double>::infinity();
  for (std::size_t k = v.size(); k-- > 0;) {
    if (v[k] >= threshold) {
      double a = v[k] - threshold, b = threshold - v[k + 1];
      return t[k] + (t[k + 1] - t[k]) * a / (a + b);
    }
  }
  return t.front();
}

inline double max_over_window(const TrajectoryRecord& rec, double from, double to, auto&& value) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& s : rec.samples)
    if (s.t >= from - 1e-9 && s.t <= to + 1e-9) worst = std::max(worst, value(s));
  return worst;
}

struct Metrics {
  double final_norm_x = 0.0;
  double final_err_r = 0.0;
  double final_max_err = 0.0;
  double settling_err_r = 0.0;  // to 1e-2
  std::vector<double> gamma_sup, gamma_s_sup, beta_sup;
  std::vector<double> chattering;  // total variation of u per unit time
};

inline Metrics metrics(const TrajectoryRecord& rec) {
  Metrics m;
  if (rec.samples.empty()) return m;
  const Sample& last = rec.samples.back();
  m.final_norm_x = last.norm_x;
  m.final_err_r = last.err_r;
  for (double e : last.err) m.final_max_err = std::max(m.final_max_err, e);
  std::vector<double> t, er;
  for (const auto& s : rec.samples) {
    t.push_back(s.t);
    er.push_back(s.err_r);
  }
  m.settling_err_r = settling_time(t, er, 1e-2);
  m.gamma_sup.assign(last.gamma.size(), 0.0);
  m.gamma_s_sup.assign(last.gamma_s.size(), 0.0);
  m.beta_sup.assign(last.beta.size(), 0.0);
  for (const auto& s : rec.samples) {
    for (std::size_t i = 0; i < s.gamma.size(); ++i) {
      m.gamma_sup[i] = std::max(m.gamma_sup[i], s.gamma[i]);
      m.gamma_s_sup[i] = std::max(m.gamma_s_sup[i], s.gamma_s[i]);
    }
    for (std::size_t k = 0; k < s.beta.size(); ++k) m.beta_sup[k] = std::max(m.beta_sup[k], s.beta[k]);
  }
  double span = rec.samples.back().t - rec.samples.front().t;
  if (rec.u_variation.size() == rec.controllers && span > 0) {
    for (double tv : rec.u_variation) m.chattering.push_back(tv / span);
  } else {
    // no step-resolution data: fall back to the recorded samples
    m.chattering.assign(rec.controllers, 0.0);
    for (std::size_t k = 1; k < rec.samples.size(); ++k) {
      std::size_t off = 0;
      for (std::size_t c = 0; c < rec.controllers && c < rec.u_widths.size(); ++c) {
        std::size_t width = rec.u_widths[c];
        for (std::size_t j = 0; j < width; ++j)
          m.chattering[c] += std::abs(rec.samples[k].u[off + j] - rec.samples[k - 1].u[off + j]);
        off += width;
      }
    }
    if (span > 0)
      for (double& c : m.chattering) c /= span;
  }
  return m;
}

}  // namespace dobc
