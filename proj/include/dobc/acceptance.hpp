#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "report.hpp"
#include "scenario.hpp"

namespace dobc {

struct Check {
  std::string name;
  double value = 0.0;
  std::string relation;  // "<" or ">"
  double threshold = 0.0;
  bool passed = false;
};

inline Check check_below(std::string name, double value, double threshold) {
  return {std::move(name), value, "<", threshold, value < threshold};
}
inline Check check_above(std::string name, double value, double threshold) {
  return {std::move(name), value, ">", threshold, value > threshold};
}

struct RunSummary {
  std::string scenario;
  std::string digest;
  std::vector<GateResult> gates;
  std::vector<Check> checks;
  Metrics metrics;
  std::string error;  // set when the run could not complete

  bool passed() const {
    if (!error.empty()) return false;
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }
};

namespace detail {

inline Json number_json(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? Json("inf") : (v < 0 ? Json("-inf") : Json("nan"));
}

inline Json numbers_json(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number_json(x));
  return out;
}

}  // namespace detail

inline Json to_json(const RunSummary& s) {
  using detail::number_json;
  using detail::numbers_json;
  Json j;
  j["scenario"] = s.scenario;
  j["digest"] = s.digest;
  j["passed"] = s.passed();
  if (!s.error.empty()) j["error"] = s.error;
  Json gates = Json::array();
  for (const auto& g : s.gates) gates.push_back({{"name", g.name}, {"passed", g.passed}, {"detail", g.detail}});
  j["gates"] = gates;
  Json checks = Json::array();
  for (const auto& c : s.checks)
    checks.push_back({{"name", c.name},
                      {"value", number_json(c.value)},
                      {"relation", c.relation},
                      {"threshold", c.threshold},
                      {"passed", c.passed}});
  j["checks"] = checks;
  const Metrics& m = s.metrics;
  j["metrics"] = {{"final_norm_x", number_json(m.final_norm_x)},
                  {"final_err_r", number_json(m.final_err_r)},
                  {"final_max_err", number_json(m.final_max_err)},
                  {"settling_err_r", number_json(m.settling_err_r)},
                  {"gamma_sup", numbers_json(m.gamma_sup)},
                  {"gamma_s_sup", numbers_json(m.gamma_s_sup)},
                  {"beta_sup", numbers_json(m.beta_sup)},
                  {"chattering", numbers_json(m.chattering)}};
  return j;
}

// Largest value of f(sample) over samples with from <= t <= to; -inf when the window is empty.
template <class F>
double window_max(const TrajectoryRecord& rec, double from, double to, F&& f) {
  return max_over_window(rec, from, to, f);
}

inline double max_node_error(const Sample& s) {
  double m = 0.0;
  for (double e : s.err) m = std::max(m, e);
  return m;
}

// Relative growth of every adaptive observer gain between t_ref and the end of the run.
inline double gain_growth_after(const TrajectoryRecord& rec, double t_ref) {
  const Sample* ref = nullptr;
  for (const auto& s : rec.samples)
    if (std::abs(s.t - t_ref) < 1e-9) ref = &s;
  if (!ref || rec.samples.back().t <= t_ref) return std::numeric_limits<double>::infinity();
  const Sample& last = rec.samples.back();
  double worst = 0.0;
  auto growth = [&](double before, double after) {
    if (!std::isfinite(after)) return std::numeric_limits<double>::infinity();
    if (before <= 0) return after > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    return (after - before) / before;
  };
  for (std::size_t i = 0; i < last.gamma.size(); ++i) {
    worst = std::max(worst, growth(ref->gamma[i], last.gamma[i]));
    worst = std::max(worst, growth(ref->gamma_s[i], last.gamma_s[i]));
  }
  return worst;
}

// max over samples and nodes of ||T_id^T e_i(t)|| / (2 exp(alpha_i t) ||T_id^T e_i(0)|| + floor);
// the structural bound holds when this is <= 1. Zero-mode nodes have alpha = -inf.
inline double structural_bound_ratio(const TrajectoryRecord& rec, const ClosedLoop& loop, double floor = 1e-8) {
  if (rec.samples.empty()) return std::numeric_limits<double>::infinity();
  const Sample& first = rec.samples.front();
  double worst = 0.0;
  for (std::size_t i = 0; i < loop.observers.size(); ++i) {
    const auto& q = loop.observers[i].quad;
    const double alpha = q.mode == EMode::Stable ? spectral_abscissa(q.e) : -std::numeric_limits<double>::infinity();
    for (const auto& s : rec.samples) {
      double env = q.mode == EMode::Stable ? 2.0 * std::exp(alpha * (s.t - first.t)) * first.eps_d[i] : 0.0;
      worst = std::max(worst, s.eps_d[i] / (env + floor));
    }
  }
  return worst;
}

inline double max_adaptive_gain(const TrajectoryRecord& rec) {
  double m = 0.0;
  for (const auto& s : rec.samples)
    for (const auto* v : {&s.gamma, &s.gamma_s, &s.beta})
      for (double x : *v) m = std::max(m, std::isfinite(x) ? x : std::numeric_limits<double>::infinity());
  return m;
}

// Same scenario driven by the ideal sliding law at the matched gain.
inline ScenarioConfig ideal_sliding_variant(ScenarioConfig cfg) {
  for (auto& c : cfg.controllers)
    if (c.mode == ControllerMode::SlidingAdaptive) c.mode = ControllerMode::SlidingIdeal;
  cfg.sliding.beta.reset();
  cfg.name += "-ideal";
  return cfg;
}

struct AcceptanceOptions {
  std::optional<double> horizon;
  std::optional<double> step;
  std::optional<std::size_t> stride;
};

inline void apply(const AcceptanceOptions& o, ScenarioConfig& cfg) {
  if (o.horizon) cfg.integrator.horizon = *o.horizon;
  if (o.step) cfg.integrator.step = *o.step;
  if (o.stride) cfg.integrator.stride = *o.stride;
}

// Thresholds of one built-in scenario applied to its record.
inline std::vector<Check> scenario_checks(const std::string& name, const TrajectoryRecord& rec, const ClosedLoop& loop,
                                          const TrajectoryRecord* ideal_companion = nullptr) {
  std::vector<Check> out;
  const double end = rec.samples.empty() ? 0.0 : rec.samples.back().t;
  auto err_r = [](const Sample& s) { return s.err_r; };
  auto nx = [](const Sample& s) { return s.norm_x; };
  auto nerr = [](const Sample& s) { return max_node_error(s); };
  // an empty window reads as +inf so "below" checks fail on truncated runs
  auto wmax = [&](double from, auto&& f) {
    double v = window_max(rec, from, end, f);
    return (end < from || !std::isfinite(v)) ? std::numeric_limits<double>::infinity() : v;
  };

  if (name == "example1") {
    out.push_back(check_below("max_err_after_25", wmax(25.0, nerr), 1e-2));
    out.push_back(check_below("gain_growth_after_25", gain_growth_after(rec, 25.0), 1e-2));
  } else if (name == "example2") {
    out.push_back(check_below("max_err_r_after_35", wmax(35.0, err_r), 1e-2));
    out.push_back(check_below("max_err_after_35", wmax(35.0, nerr), 1e-2));
    out.push_back(check_below("gain_growth_after_35", gain_growth_after(rec, 35.0), 1e-2));
  } else if (name == "example2-ablation") {
    double from = 0.8 * end;
    double er = rec.samples.empty() ? 0.0 : window_max(rec, from, end, err_r);
    double ei = rec.samples.empty() ? 0.0 : window_max(rec, from, end, nerr);
    out.push_back(check_above("max_err_r_final_20pct", er, 0.05));
    out.push_back(check_above("max_err_final_20pct", ei, 0.05));
  } else if (name == "example3") {
    out.push_back(check_below("max_norm_x_after_35", wmax(35.0, nx), 0.1));
    out.push_back(check_below("max_err_after_35", wmax(35.0, nerr), 0.1));
    out.push_back(check_below("max_adaptive_gain", max_adaptive_gain(rec), 1e3));
    if (ideal_companion) {
      Metrics ma = metrics(rec), mi = metrics(*ideal_companion);
      double worst = 0.0;
      for (std::size_t k = 0; k < ma.chattering.size(); ++k)
        worst = std::max(worst, mi.chattering[k] > 0 ? ma.chattering[k] / mi.chattering[k]
                                                      : std::numeric_limits<double>::infinity());
      out.push_back(check_below("chattering_ratio_vs_ideal", worst, 0.1));
    }
  } else {
    throw UnknownScenario("no acceptance thresholds for '" + name + "'");
  }
  out.push_back(check_below("structural_bound_ratio", structural_bound_ratio(rec, loop), 1.0 + 1e-9));
  return out;
}

struct AcceptanceRun {
  RunSummary summary;
  TrajectoryRecord record;
  std::optional<TrajectoryRecord> companion;
  ClosedLoop loop;
};

inline AcceptanceRun run_acceptance_one(const std::string& name, const AcceptanceOptions& opt = {}) {
  AcceptanceRun run;
  ScenarioConfig cfg = builtin_scenario(name);
  apply(opt, cfg);
  run.summary.scenario = name;
  run.summary.digest = config_digest(cfg);
  AssembledScenario as = assemble(cfg);
  run.summary.gates = as.gates;
  run.loop = as.loop;
  run.record = run_scenario(as);
  if (name == "example3") {
    AssembledScenario ideal = assemble(ideal_sliding_variant(cfg));
    run.companion = run_scenario(ideal);
  }
  run.summary.metrics = metrics(run.record);
  run.summary.checks = scenario_checks(name, run.record, run.loop, run.companion ? &*run.companion : nullptr);
  return run;
}

inline std::vector<RunSummary> run_acceptance(const std::vector<std::string>& names, const AcceptanceOptions& opt = {}) {
  std::vector<RunSummary> out;
  for (const auto& n : names) {
    try {
      out.push_back(run_acceptance_one(n, opt).summary);
    } catch (const UnknownScenario&) {
      throw;
    } catch (const Error& e) {
      RunSummary s;
      s.scenario = n;
      s.error = e.what();
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace dobc
