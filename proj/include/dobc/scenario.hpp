#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sim_engine.hpp"

namespace dobc {

using Json = nlohmann::json;

struct ObserverConfig {
  Matrix c;
  std::vector<std::size_t> inputs;  // controllers whose inputs this node receives
  std::optional<Matrix> b_minus;    // derived from the other channels when absent
  std::string design = "decompose";  // or "local": Luenberger observer of one diagonal block
  Eigen::Index block_offset = 0;
  Eigen::Index block_size = 0;
  double injection_shift = 0.2;
  double injection_max_gain = 2.0;  // transient-gain limit of the rho ladder
  AdaptiveGains gains;
};

struct ControllerConfig {
  ControllerMode mode = ControllerMode::Linear;
  std::size_t source = 0;
  Signal signal;
};

struct GainRule {
  std::string rule = "care";  // care | explicit | none
  double shift = 0.2;
  std::vector<Matrix> k;  // explicit gains, one per controller
};

struct SlidingConfig {
  std::optional<Matrix> p;  // Lyapunov solution of A + BK when absent
  std::optional<double> beta;  // matched bound v_bar ||X_v|| when absent
  double epsilon = 0.2;
  double sigma = 0.1;
  double phi = 5.0;
};

struct UnknownInputConfig {
  Matrix s;
  Vector v0;
  Matrix b_v;
};

struct IntegratorConfig {
  double horizon = 30.0;
  double step = 1e-3;
  std::size_t stride = 100;
};

struct ScenarioConfig {
  int format = 1;
  std::string name;
  Matrix a;
  Vector x0;
  std::vector<Matrix> channels;
  std::optional<UnknownInputConfig> unknown_input;
  std::size_t graph_nodes = 0;
  std::vector<Edge> edges;
  std::vector<ObserverConfig> observers;
  std::vector<ControllerConfig> controllers;
  GainRule gain;
  SlidingConfig sliding;
  IntegratorConfig integrator;
};

namespace detail {

inline bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}
inline bool same(const Vector& a, const Vector& b) { return a.size() == b.size() && (a.size() == 0 || a == b); }
template <class T>
bool same(const std::optional<T>& a, const std::optional<T>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same(*a, *b);
}
inline bool same(double a, double b) { return a == b; }

}  // namespace detail

inline bool operator==(const AdaptiveGains& a, const AdaptiveGains& b) {
  return a.gamma0 == b.gamma0 && a.gamma_s0 == b.gamma_s0 && a.phi == b.phi && a.phi_s == b.phi_s &&
         a.sigma == b.sigma && a.sigma_s == b.sigma_s;
}
inline bool operator==(const Edge& a, const Edge& b) { return a.i == b.i && a.j == b.j && a.weight == b.weight; }
inline bool operator==(const ObserverConfig& a, const ObserverConfig& b) {
  return detail::same(a.c, b.c) && a.inputs == b.inputs && detail::same(a.b_minus, b.b_minus) &&
         a.design == b.design && a.block_offset == b.block_offset && a.block_size == b.block_size &&
         a.injection_shift == b.injection_shift &&
         a.injection_max_gain == b.injection_max_gain && a.gains == b.gains;
}
inline bool operator==(const ControllerConfig& a, const ControllerConfig& b) {
  return a.mode == b.mode && a.source == b.source && a.signal == b.signal;
}
inline bool operator==(const GainRule& a, const GainRule& b) {
  if (a.rule != b.rule || a.shift != b.shift || a.k.size() != b.k.size()) return false;
  for (std::size_t i = 0; i < a.k.size(); ++i)
    if (!detail::same(a.k[i], b.k[i])) return false;
  return true;
}
inline bool operator==(const SlidingConfig& a, const SlidingConfig& b) {
  return detail::same(a.p, b.p) && a.beta == b.beta && a.epsilon == b.epsilon && a.sigma == b.sigma &&
         a.phi == b.phi;
}
inline bool operator==(const UnknownInputConfig& a, const UnknownInputConfig& b) {
  return detail::same(a.s, b.s) && detail::same(a.v0, b.v0) && detail::same(a.b_v, b.b_v);
}
inline bool operator==(const IntegratorConfig& a, const IntegratorConfig& b) {
  return a.horizon == b.horizon && a.step == b.step && a.stride == b.stride;
}
inline bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  if (a.channels.size() != b.channels.size()) return false;
  for (std::size_t i = 0; i < a.channels.size(); ++i)
    if (!detail::same(a.channels[i], b.channels[i])) return false;
  bool ui = a.unknown_input.has_value() == b.unknown_input.has_value() &&
            (!a.unknown_input || *a.unknown_input == *b.unknown_input);
  return a.format == b.format && a.name == b.name && detail::same(a.a, b.a) && detail::same(a.x0, b.x0) && ui &&
         a.graph_nodes == b.graph_nodes && a.edges == b.edges && a.observers == b.observers &&
         a.controllers == b.controllers && a.gain == b.gain && a.sliding == b.sliding &&
         a.integrator == b.integrator;
}

// ---------------------------------------------------------------------------
// JSON mapping. Node, controller and state indices are 1-based in files.

namespace detail {

inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

inline Json gains_json(const AdaptiveGains& g) {
  return {{"gamma0", g.gamma0}, {"gamma_s0", g.gamma_s0}, {"phi", g.phi},
          {"phi_s", g.phi_s},   {"sigma", g.sigma},       {"sigma_s", g.sigma_s}};
}

class Reader {
 public:
  const Json& at(const Json& j, const std::string& key, const std::string& path) const {
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(path, "missing key '" + key + "'");
    return *it;
  }
  const Json* find(const Json& j, const std::string& key) const {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
  }
  double number(const Json& j, const std::string& path) const {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
  }
  double number_or(const Json& obj, const std::string& key, double def, const std::string& path) const {
    const Json* j = find(obj, key);
    return j ? number(*j, path + "/" + key) : def;
  }
  std::size_t index(const Json& j, const std::string& path) const {
    if (!j.is_number_integer() || j.get<long long>() < 1) fail(path, "expected a 1-based index");
    return std::size_t(j.get<long long>() - 1);
  }
  std::string text(const Json& j, const std::string& path) const {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
  }
  Vector vector(const Json& j, const std::string& path) const {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    Vector v(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) v(k) = number(j[k], path + "/" + std::to_string(k));
    return v;
  }
  Matrix matrix(const Json& j, const std::string& path) const {
    if (!j.is_array()) fail(path, "expected a matrix (array of rows)");
    if (j.empty()) return Matrix(0, 0);
    std::size_t cols = 0;
    for (std::size_t r = 0; r < j.size(); ++r) {
      const std::string rp = path + "/" + std::to_string(r);
      if (!j[r].is_array()) fail(rp, "expected a row array");
      if (r == 0) cols = j[r].size();
      else if (j[r].size() != cols)
        fail(rp, "row has " + std::to_string(j[r].size()) + " entries, expected " + std::to_string(cols));
    }
    Matrix m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r)
      for (std::size_t c = 0; c < cols; ++c)
        m(r, c) = number(j[r][c], path + "/" + std::to_string(r) + "/" + std::to_string(c));
    return m;
  }

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw ParseError("at " + (path.empty() ? std::string("/") : path) + ": " + what);
  }
};

inline AdaptiveGains read_gains(const Reader& rd, const Json& j, const std::string& path) {
  AdaptiveGains g;
  g.gamma0 = rd.number_or(j, "gamma0", g.gamma0, path);
  g.gamma_s0 = rd.number_or(j, "gamma_s0", g.gamma_s0, path);
  g.phi = rd.number_or(j, "phi", g.phi, path);
  g.phi_s = rd.number_or(j, "phi_s", g.phi_s, path);
  g.sigma = rd.number_or(j, "sigma", g.sigma, path);
  g.sigma_s = rd.number_or(j, "sigma_s", g.sigma_s, path);
  return g;
}

}  // namespace detail

inline Json to_json(const ScenarioConfig& cfg) {
  using namespace detail;
  Json j;
  j["format"] = cfg.format;
  j["name"] = cfg.name;
  Json channels = Json::array();
  for (const auto& b : cfg.channels) channels.push_back(matrix_json(b));
  j["plant"] = {{"A", matrix_json(cfg.a)}, {"x0", vector_json(cfg.x0)}, {"channels", channels}};
  if (cfg.unknown_input)
    j["unknown_input"] = {{"S", matrix_json(cfg.unknown_input->s)},
                          {"v0", vector_json(cfg.unknown_input->v0)},
                          {"B_v", matrix_json(cfg.unknown_input->b_v)}};
  Json edges = Json::array();
  for (const auto& e : cfg.edges) edges.push_back({e.i + 1, e.j + 1, e.weight});
  j["graph"] = {{"nodes", cfg.graph_nodes}, {"edges", edges}};

  Json obs = Json::array();
  for (const auto& o : cfg.observers) {
    Json jo;
    jo["C"] = matrix_json(o.c);
    Json inputs = Json::array();
    for (auto k : o.inputs) inputs.push_back(k + 1);
    jo["inputs"] = inputs;
    if (o.b_minus) jo["B_minus"] = matrix_json(*o.b_minus);
    jo["design"] = o.design;
    if (o.design == "local") {
      jo["block"] = {{"offset", o.block_offset + 1}, {"size", o.block_size}};
      jo["shift"] = o.injection_shift;
      jo["max_transient_gain"] = o.injection_max_gain;
    }
    jo["gains"] = gains_json(o.gains);
    obs.push_back(jo);
  }
  j["observers"] = obs;

  Json ctrl;
  Json gain = {{"rule", cfg.gain.rule}};
  if (cfg.gain.rule == "care") gain["shift"] = cfg.gain.shift;
  if (cfg.gain.rule == "explicit") {
    Json ks = Json::array();
    for (const auto& k : cfg.gain.k) ks.push_back(matrix_json(k));
    gain["K"] = ks;
  }
  ctrl["gain"] = gain;
  Json sliding = {{"epsilon", cfg.sliding.epsilon}, {"sigma", cfg.sliding.sigma}, {"phi", cfg.sliding.phi}};
  if (cfg.sliding.p) sliding["P"] = matrix_json(*cfg.sliding.p);
  if (cfg.sliding.beta) sliding["beta"] = *cfg.sliding.beta;
  ctrl["sliding"] = sliding;
  Json nodes = Json::array();
  for (const auto& c : cfg.controllers) {
    Json sig = Json::array();
    for (const auto& s : c.signal.parts)
      sig.push_back({{"amplitude", s.amplitude}, {"frequency", s.frequency}, {"phase", s.phase}});
    nodes.push_back({{"mode", to_string(c.mode)}, {"source", c.source + 1}, {"signal", sig}});
  }
  ctrl["nodes"] = nodes;
  j["controllers"] = ctrl;
  j["integrator"] = {{"horizon", cfg.integrator.horizon},
                     {"step", cfg.integrator.step},
                     {"stride", cfg.integrator.stride}};
  return j;
}

inline std::string serialize_config(const ScenarioConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

// Dimensional and referential checks; returns every violated constraint.
inline std::vector<std::string> validation_problems(const ScenarioConfig& cfg) {
  std::vector<std::string> p;
  const Eigen::Index n = cfg.a.rows();
  if (cfg.format != 1) p.push_back("format must be 1");
  if (cfg.a.rows() != cfg.a.cols()) p.push_back("A not square (" + std::to_string(cfg.a.rows()) + "x" + std::to_string(cfg.a.cols()) + ")");
  if (n == 0) p.push_back("A is empty");
  if (cfg.x0.size() != n) p.push_back("x0 length differs from the state dimension");
  for (std::size_t k = 0; k < cfg.channels.size(); ++k)
    if (cfg.channels[k].rows() != n) p.push_back("channel " + std::to_string(k + 1) + " rows differ from the state dimension");
  if (cfg.unknown_input) {
    const auto& u = *cfg.unknown_input;
    if (u.s.rows() != u.s.cols()) p.push_back("unknown_input S not square");
    if (u.v0.size() != u.s.rows()) p.push_back("unknown_input v0 length differs from S");
    if (u.b_v.rows() != n || u.b_v.cols() != u.s.rows()) p.push_back("unknown_input B_v must be n x dim(v)");
  }
  if (cfg.graph_nodes != cfg.observers.size()) p.push_back("graph node count differs from the number of observers");
  for (const auto& e : cfg.edges) {
    if (e.i >= cfg.graph_nodes || e.j >= cfg.graph_nodes) p.push_back("graph edge references a missing node");
    if (e.i == e.j) p.push_back("graph edge is a self loop");
    if (!(e.weight > 0)) p.push_back("graph edge weight must be positive");
  }
  for (std::size_t i = 0; i < cfg.observers.size(); ++i) {
    const auto& o = cfg.observers[i];
    const std::string tag = "observer " + std::to_string(i + 1) + ": ";
    if (o.c.cols() != n) p.push_back(tag + "C columns differ from the state dimension");
    for (auto k : o.inputs)
      if (k >= cfg.controllers.size()) p.push_back(tag + "input references a missing controller");
    if (o.b_minus && o.b_minus->rows() != n && o.b_minus->size() != 0) p.push_back(tag + "B_minus rows differ from the state dimension");
    if (o.design != "decompose" && o.design != "local") p.push_back(tag + "design must be 'decompose' or 'local'");
    if (o.design == "local" && (o.block_size <= 0 || o.block_offset < 0 || o.block_offset + o.block_size > n))
      p.push_back(tag + "local block outside the state");
    if (o.design == "local" && !(o.injection_max_gain >= 1.0)) p.push_back(tag + "max_transient_gain must be >= 1");
    if (o.gains.gamma0 < 0 || o.gains.gamma_s0 < 0 || o.gains.phi < 0 || o.gains.phi_s < 0 || o.gains.sigma < 0 ||
        o.gains.sigma_s < 0)
      p.push_back(tag + "adaptive gains must be nonnegative");
  }
  if (cfg.controllers.size() != cfg.channels.size()) p.push_back("one controller per channel is required");
  for (std::size_t k = 0; k < cfg.controllers.size(); ++k) {
    const auto& c = cfg.controllers[k];
    if (c.mode != ControllerMode::OpenLoop && c.source >= cfg.observers.size())
      p.push_back("controller " + std::to_string(k + 1) + ": source references a missing observer");
  }
  if (cfg.gain.rule != "care" && cfg.gain.rule != "explicit" && cfg.gain.rule != "none")
    p.push_back("controller gain rule must be care, explicit or none");
  if (cfg.gain.rule == "explicit") {
    if (cfg.gain.k.size() != cfg.channels.size()) p.push_back("explicit gains: one K per controller");
    for (std::size_t k = 0; k < cfg.gain.k.size() && k < cfg.channels.size(); ++k)
      if (cfg.gain.k[k].rows() != cfg.channels[k].cols() || cfg.gain.k[k].cols() != n)
        p.push_back("explicit gain " + std::to_string(k + 1) + " must be m x n");
  }
  if (cfg.sliding.p && (cfg.sliding.p->rows() != n || cfg.sliding.p->cols() != n)) p.push_back("sliding P must be n x n");
  if (!(cfg.sliding.epsilon > 0)) p.push_back("sliding epsilon must be positive");
  if (!(cfg.integrator.step > 0)) p.push_back("integrator step must be positive");
  if (cfg.integrator.horizon < 0) p.push_back("integrator horizon must be nonnegative");
  if (cfg.integrator.stride == 0) p.push_back("integrator stride must be positive");
  return p;
}

inline void validate_config(const ScenarioConfig& cfg) {
  auto p = validation_problems(cfg);
  if (!p.empty()) throw ValidationError(std::move(p));
}

inline ScenarioConfig from_json(const Json& j) {
  detail::Reader rd;
  ScenarioConfig cfg;
  {
    const Json& f = rd.at(j, "format", "");
    if (!f.is_number_integer()) rd.fail("/format", "expected an integer");
    cfg.format = f.get<int>();
    if (cfg.format != 1) rd.fail("/format", "unsupported format " + std::to_string(cfg.format));
  }
  if (const Json* nm = rd.find(j, "name")) cfg.name = rd.text(*nm, "/name");

  const Json& plant = rd.at(j, "plant", "");
  cfg.a = rd.matrix(rd.at(plant, "A", "/plant"), "/plant/A");
  const Eigen::Index n = cfg.a.rows();
  cfg.x0 = rd.vector(rd.at(plant, "x0", "/plant"), "/plant/x0");
  const Json& ch = rd.at(plant, "channels", "/plant");
  if (!ch.is_array()) rd.fail("/plant/channels", "expected an array of matrices");
  for (std::size_t k = 0; k < ch.size(); ++k)
    cfg.channels.push_back(rd.matrix(ch[k], "/plant/channels/" + std::to_string(k)));

  if (const Json* ui = rd.find(j, "unknown_input")) {
    UnknownInputConfig u;
    u.s = rd.matrix(rd.at(*ui, "S", "/unknown_input"), "/unknown_input/S");
    u.v0 = rd.vector(rd.at(*ui, "v0", "/unknown_input"), "/unknown_input/v0");
    u.b_v = rd.matrix(rd.at(*ui, "B_v", "/unknown_input"), "/unknown_input/B_v");
    cfg.unknown_input = u;
  }

  const Json& graph = rd.at(j, "graph", "");
  const Json& gn = rd.at(graph, "nodes", "/graph");
  if (!gn.is_number_integer() || gn.get<long long>() < 0) rd.fail("/graph/nodes", "expected a node count");
  cfg.graph_nodes = gn.get<std::size_t>();
  const Json& edges = rd.at(graph, "edges", "/graph");
  if (!edges.is_array()) rd.fail("/graph/edges", "expected an array of [i, j, weight]");
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const std::string ep = "/graph/edges/" + std::to_string(k);
    const Json& e = edges[k];
    if (!e.is_array() || e.size() < 2 || e.size() > 3) rd.fail(ep, "expected [i, j] or [i, j, weight]");
    Edge ed{rd.index(e[0], ep + "/0"), rd.index(e[1], ep + "/1"), e.size() == 3 ? rd.number(e[2], ep + "/2") : 1.0};
    cfg.edges.push_back(ed);
  }

  const Json& obs = rd.at(j, "observers", "");
  if (!obs.is_array()) rd.fail("/observers", "expected an array");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const std::string op = "/observers/" + std::to_string(i);
    const Json& jo = obs[i];
    ObserverConfig o;
    o.c = rd.matrix(rd.at(jo, "C", op), op + "/C");
    if (o.c.size() == 0) o.c.resize(0, n);
    const Json& inputs = rd.at(jo, "inputs", op);
    if (!inputs.is_array()) rd.fail(op + "/inputs", "expected an array of controller indices");
    for (std::size_t k = 0; k < inputs.size(); ++k) o.inputs.push_back(rd.index(inputs[k], op + "/inputs/" + std::to_string(k)));
    if (const Json* bm = rd.find(jo, "B_minus")) {
      Matrix m = rd.matrix(*bm, op + "/B_minus");
      if (m.size() == 0) m.resize(n, 0);
      o.b_minus = m;
    }
    if (const Json* d = rd.find(jo, "design")) o.design = rd.text(*d, op + "/design");
    if (o.design == "local") {
      const Json& blk = rd.at(jo, "block", op);
      o.block_offset = Eigen::Index(rd.index(rd.at(blk, "offset", op + "/block"), op + "/block/offset"));
      const Json& sz = rd.at(blk, "size", op + "/block");
      if (!sz.is_number_integer()) rd.fail(op + "/block/size", "expected an integer");
      o.block_size = sz.get<Eigen::Index>();
      o.injection_shift = rd.number_or(jo, "shift", o.injection_shift, op);
      o.injection_max_gain = rd.number_or(jo, "max_transient_gain", o.injection_max_gain, op);
    }
    if (const Json* g = rd.find(jo, "gains")) o.gains = detail::read_gains(rd, *g, op + "/gains");
    cfg.observers.push_back(o);
  }

  const Json& ctrl = rd.at(j, "controllers", "");
  if (const Json* g = rd.find(ctrl, "gain")) {
    cfg.gain.rule = rd.text(rd.at(*g, "rule", "/controllers/gain"), "/controllers/gain/rule");
    cfg.gain.shift = rd.number_or(*g, "shift", cfg.gain.shift, "/controllers/gain");
    if (const Json* ks = rd.find(*g, "K")) {
      if (!ks->is_array()) rd.fail("/controllers/gain/K", "expected an array of matrices");
      for (std::size_t k = 0; k < ks->size(); ++k)
        cfg.gain.k.push_back(rd.matrix((*ks)[k], "/controllers/gain/K/" + std::to_string(k)));
    }
  }
  if (const Json* s = rd.find(ctrl, "sliding")) {
    const std::string sp = "/controllers/sliding";
    if (const Json* p = rd.find(*s, "P")) cfg.sliding.p = rd.matrix(*p, sp + "/P");
    if (const Json* b = rd.find(*s, "beta")) cfg.sliding.beta = rd.number(*b, sp + "/beta");
    cfg.sliding.epsilon = rd.number_or(*s, "epsilon", cfg.sliding.epsilon, sp);
    cfg.sliding.sigma = rd.number_or(*s, "sigma", cfg.sliding.sigma, sp);
    cfg.sliding.phi = rd.number_or(*s, "phi", cfg.sliding.phi, sp);
  }
  const Json& nodes = rd.at(ctrl, "nodes", "/controllers");
  if (!nodes.is_array()) rd.fail("/controllers/nodes", "expected an array");
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::string cp = "/controllers/nodes/" + std::to_string(k);
    ControllerConfig c;
    try {
      c.mode = controller_mode_from_string(rd.text(rd.at(nodes[k], "mode", cp), cp + "/mode"));
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError& e) {
      rd.fail(cp + "/mode", e.what());
    }
    c.source = rd.find(nodes[k], "source") ? rd.index(nodes[k]["source"], cp + "/source") : k;
    if (const Json* sig = rd.find(nodes[k], "signal")) {
      if (!sig->is_array()) rd.fail(cp + "/signal", "expected an array of sinusoids");
      for (std::size_t q = 0; q < sig->size(); ++q) {
        const std::string qp = cp + "/signal/" + std::to_string(q);
        Sinusoid s;
        s.amplitude = rd.number_or((*sig)[q], "amplitude", 1.0, qp);
        s.frequency = rd.number_or((*sig)[q], "frequency", 1.0, qp);
        s.phase = rd.number_or((*sig)[q], "phase", 0.0, qp);
        c.signal.parts.push_back(s);
      }
    }
    cfg.controllers.push_back(c);
  }

  if (const Json* in = rd.find(j, "integrator")) {
    cfg.integrator.horizon = rd.number_or(*in, "horizon", cfg.integrator.horizon, "/integrator");
    cfg.integrator.step = rd.number_or(*in, "step", cfg.integrator.step, "/integrator");
    if (const Json* st = rd.find(*in, "stride")) {
      if (!st->is_number_integer() || st->get<long long>() < 1) rd.fail("/integrator/stride", "expected a positive integer");
      cfg.integrator.stride = st->get<std::size_t>();
    }
  }
  validate_config(cfg);
  return cfg;
}

inline ScenarioConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return from_json(j);
}

// FNV-1a over the canonical (sorted-key, compact) JSON form.
inline std::string config_digest(const ScenarioConfig& cfg) {
  std::string text = to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Built-in scenarios

namespace detail {

inline Matrix unit_columns(Eigen::Index n, std::initializer_list<int> ones) {
  Matrix v = Matrix::Zero(n, 1);
  for (int k : ones) v(k - 1, 0) = 1.0;
  return v;
}

inline ScenarioConfig nine_state_network() {
  ScenarioConfig cfg;
  const Eigen::Index n = 9;
  cfg.a = Matrix::Zero(n, n);
  for (auto [i, j] : std::vector<std::pair<int, int>>{{1, 2}, {1, 4}, {2, 9}, {3, 4}, {4, 7}, {5, 6}, {7, 8}, {8, 9}})
    cfg.a(i - 1, j - 1) = 1.0;
  cfg.channels = {unit_columns(n, {2}), unit_columns(n, {4}), unit_columns(n, {1, 5, 6}), unit_columns(n, {3, 9}),
                  unit_columns(n, {1})};
  const int outputs[6] = {1, 3, 5, 7, 2, 4};
  const std::size_t known[6] = {0, 1, 2, 3, 4, 4};
  for (int i = 0; i < 6; ++i) {
    ObserverConfig o;
    o.c = unit_columns(n, {outputs[i]}).transpose();
    o.inputs = {known[i]};
    cfg.observers.push_back(o);
  }
  cfg.graph_nodes = 6;
  for (std::size_t k = 0; k < 6; ++k) cfg.edges.push_back({k, (k + 1) % 6, 1.0});
  cfg.gain.rule = "care";
  cfg.gain.shift = 0.2;
  return cfg;
}

}  // namespace detail

inline std::vector<std::string> builtin_names() { return {"example1", "example2", "example2-ablation", "example3"}; }

inline ScenarioConfig builtin_scenario(const std::string& name) {
  using detail::unit_columns;
  if (name == "example1") {
    ScenarioConfig cfg;
    cfg.name = name;
    std::vector<Matrix> as{Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix(2, 2), Matrix(2, 2), Matrix(3, 3)};
    as[2] << 0, 1, 0, 0;
    as[3] << 0, 1, 0, 0;
    as[4] << 0, 1, 0, 0, 0, 1, 0, 0, 0;
    std::vector<Matrix> bs;
    std::vector<Matrix> cs;
    for (const auto& a : as) {
      Matrix b = Matrix::Zero(a.rows(), 1), c = Matrix::Zero(1, a.rows());
      b(a.rows() - 1, 0) = 1.0;
      c(0, 0) = 1.0;
      bs.push_back(b);
      cs.push_back(c);
    }
    cfg.a = block_diagonal(as);
    const Eigen::Index n = cfg.a.rows();
    cfg.x0.resize(n);
    cfg.x0 << -1, -2, -3, -4, 5, 4, 3, 2, 1;
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < as.size(); ++i) {
      const Eigen::Index ni = as[i].rows();
      Matrix b = Matrix::Zero(n, 1);
      b.middleRows(off, ni) = bs[i];
      cfg.channels.push_back(b);
      ObserverConfig o;
      o.c = Matrix::Zero(1, n);
      o.c.middleCols(off, ni) = cs[i];
      o.inputs = {i};
      o.design = "local";
      o.block_offset = off;
      o.block_size = ni;
      o.injection_shift = 0.0;
      o.injection_max_gain = 4.0;
      o.gains = {0.1, 0.1, 0.2, 0.5, 0.0, 0.0};
      cfg.observers.push_back(o);
      ControllerConfig c;
      c.mode = ControllerMode::OpenLoop;
      c.source = i;
      // u_i = 0.5 (i-1) sin((6-i) t), i 1-based
      c.signal.parts.push_back({0.5 * double(i), double(5 - i), 0.0});
      cfg.controllers.push_back(c);
      off += ni;
    }
    cfg.graph_nodes = 5;
    for (std::size_t k = 0; k < 5; ++k) cfg.edges.push_back({k, (k + 1) % 5, 1.0});
    cfg.gain.rule = "none";
    cfg.integrator = {30.0, 1e-3, 100};
    return cfg;
  }
  if (name == "example2" || name == "example2-ablation") {
    ScenarioConfig cfg = detail::nine_state_network();
    cfg.name = name;
    cfg.x0.resize(9);
    cfg.x0 << -1, -2, -3, -4, 5, 4, 3, 2, 1;
    for (auto& o : cfg.observers) {
      o.gains = {0.1, 0.1, 0.2, 0.5, 0.0, 0.0};
      if (name == "example2-ablation") {
        o.gains.gamma_s0 = 0.0;
        o.gains.phi_s = 0.0;
      }
    }
    for (std::size_t k = 0; k < 5; ++k) {
      ControllerConfig c;
      c.mode = ControllerMode::Tracking;
      c.source = k;
      c.signal.parts.push_back({1.0, 1.0, double(k + 1)});  // r = sin(t + iota)
      cfg.controllers.push_back(c);
    }
    cfg.integrator = {40.0, 1e-3, 100};
    return cfg;
  }
  if (name == "example3" || name == "example3-ideal") {
    ScenarioConfig cfg = detail::nine_state_network();
    cfg.name = name;
    cfg.x0.resize(9);
    cfg.x0 << 1, -1, 1, -1, 1, -1, 1, -1, 1;
    UnknownInputConfig u;
    u.s.resize(2, 2);
    u.s << 0, 0.5, -0.5, 0;
    u.v0.resize(2);
    u.v0 << -2, 2;
    u.b_v = hstack({cfg.channels[0], cfg.channels[1]}, 9);
    cfg.unknown_input = u;
    for (auto& o : cfg.observers) o.gains = {0.1, 0.1, 5.0, 10.0, 0.2, 0.1};
    const bool ideal = name == "example3-ideal";
    for (std::size_t k = 0; k < 5; ++k) {
      ControllerConfig c;
      c.mode = ideal ? ControllerMode::SlidingIdeal : ControllerMode::SlidingAdaptive;
      c.source = k;
      cfg.controllers.push_back(c);
    }
    if (!ideal) cfg.sliding.beta = 0.1;  // beta(0); the ideal law uses the matched bound
    cfg.sliding.epsilon = 0.2;
    cfg.sliding.sigma = 0.1;
    cfg.sliding.phi = 5.0;
    cfg.integrator = {40.0, 1e-3, 100};
    return cfg;
  }
  throw UnknownScenario("unknown built-in scenario '" + name + "'");
}

// ---------------------------------------------------------------------------
// Assembly into a runnable closed loop

struct GateResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct AssembledScenario {
  ScenarioConfig config;
  ClosedLoop loop;
  std::vector<Matrix> b_minus;           // per observer
  std::vector<QuadrupletReport> certificates;
  Matrix care_solution;                  // controller Riccati solution (empty if unused)
  double care_residual = 0.0;
  double lyapunov_residual = 0.0;
  std::vector<double> injection_residuals;  // local-design observer Riccati residuals
  std::vector<GateResult> gates;

  bool gates_pass() const {
    for (const auto& g : gates)
      if (!g.passed) return false;
    return true;
  }
};

inline AssembledScenario assemble(const ScenarioConfig& cfg) {
  validate_config(cfg);
  AssembledScenario out;
  out.config = cfg;
  const Eigen::Index n = cfg.a.rows();
  ClosedLoop& loop = out.loop;
  loop.a = cfg.a;
  loop.x0 = cfg.x0;
  loop.graph = CommGraph(cfg.graph_nodes, cfg.edges);
  if (cfg.unknown_input) loop.unknown_input = UnknownInputModel{cfg.unknown_input->s, cfg.unknown_input->v0, cfg.unknown_input->b_v};

  // controller gains
  Matrix b_all = hstack(cfg.channels, n);
  std::vector<Matrix> ks;
  if (cfg.gain.rule == "care") {
    out.care_solution = solve_care(cfg.a, b_all, Matrix::Identity(n, n), cfg.gain.shift, CareForm::Control);
    Matrix as = cfg.a + cfg.gain.shift * Matrix::Identity(n, n);
    const Matrix& x = out.care_solution;
    out.care_residual = (as.transpose() * x + x * as - x * b_all * b_all.transpose() * x + Matrix::Identity(n, n)).norm();
    Matrix k = -b_all.transpose() * x;
    Eigen::Index r = 0;
    for (const auto& b : cfg.channels) {
      ks.push_back(k.middleRows(r, b.cols()));
      r += b.cols();
    }
  } else if (cfg.gain.rule == "explicit") {
    ks = cfg.gain.k;
  } else {
    for (const auto& b : cfg.channels) ks.push_back(Matrix::Zero(b.cols(), n));
  }
  Matrix a_cl = cfg.a;
  for (std::size_t k = 0; k < cfg.channels.size(); ++k)
    if (cfg.controllers[k].mode != ControllerMode::OpenLoop) a_cl += cfg.channels[k] * ks[k];

  bool any_sliding = false;
  for (const auto& c : cfg.controllers)
    any_sliding |= c.mode == ControllerMode::SlidingIdeal || c.mode == ControllerMode::SlidingAdaptive;
  Matrix p;
  double beta_bound = 0.0;
  if (any_sliding) {
    if (cfg.sliding.p) {
      p = *cfg.sliding.p;
    } else {
      p = solve_lyapunov(a_cl, Matrix::Identity(n, n));
      out.lyapunov_residual = (a_cl.transpose() * p + p * a_cl + Matrix::Identity(n, n)).norm();
    }
    if (loop.unknown_input) beta_bound = sliding_gain_bound(b_all, *loop.unknown_input);
  }

  for (std::size_t k = 0; k < cfg.controllers.size(); ++k) {
    const auto& cc = cfg.controllers[k];
    ControllerNode c;
    c.index = k;
    c.mode = cc.mode;
    c.channel = cfg.channels[k];
    c.k = ks[k];
    c.source = cc.source;
    c.signal = cc.signal;
    c.sliding.p = p;
    c.sliding.beta = cfg.sliding.beta ? *cfg.sliding.beta : beta_bound;
    c.sliding.epsilon = cfg.sliding.epsilon;
    c.sliding.sigma = cfg.sliding.sigma;
    c.sliding.phi = cfg.sliding.phi;
    loop.controllers.push_back(c);
  }

  // observers
  for (std::size_t i = 0; i < cfg.observers.size(); ++i) {
    const auto& oc = cfg.observers[i];
    std::vector<Matrix> known, unknown;
    for (std::size_t k = 0; k < cfg.channels.size(); ++k) {
      bool has = std::find(oc.inputs.begin(), oc.inputs.end(), k) != oc.inputs.end();
      (has ? known : unknown).push_back(cfg.channels[k]);
    }
    if (cfg.unknown_input) unknown.push_back(cfg.unknown_input->b_v);
    Matrix b_i = hstack(known, n);
    Matrix b_minus = oc.b_minus ? *oc.b_minus : orthonormal_range_basis(hstack(unknown, n));
    out.b_minus.push_back(b_minus);
    Quadruplet q;
    if (oc.design == "local") {
      const Eigen::Index off = oc.block_offset, ni = oc.block_size;
      Agent ag{cfg.a.block(off, off, ni, ni), Matrix(), oc.c.middleCols(off, ni)};
      DecomposeOptions lo;
      lo.max_transient_gain = oc.injection_max_gain;
      InjectionDesign inj = mas_injection_ladder(ag, oc.injection_shift, lo);
      out.injection_residuals.push_back(inj.residual);
      q = mas_quadruplet(off, n, ag, inj.l);
      q.rho = inj.rho;
    } else {
      q = decompose(cfg.a, b_minus, oc.c);
    }
    out.certificates.push_back(verify_quadruplet(cfg.a, b_minus, oc.c, q));
    loop.observers.push_back(make_observer_node(i, cfg.a, b_i, oc.c, q, oc.gains));
    loop.observer_inputs.push_back(oc.inputs);
  }

  // precondition gates
  auto gate = [&](std::string name, bool ok, std::string detail) { out.gates.push_back({std::move(name), ok, std::move(detail)}); };
  gate("graph connected", loop.graph.is_connected(), "");
  {
    std::vector<Matrix> bases;
    for (const auto& o : loop.observers) bases.push_back(o.quad.t);
    bool ok = false;
    std::string detail;
    try {
      auto cd = collective_strong_detectability(loop.graph, bases);
      ok = cd.holds();
      detail = "rank " + std::to_string(cd.stacked_rank) + "/" + std::to_string(n);
    } catch (const Error& e) {
      detail = e.what();
    }
    gate("collective strong detectability", ok, detail);
  }
  for (std::size_t i = 0; i < out.certificates.size(); ++i)
    gate("observer " + std::to_string(i + 1) + " certificate", out.certificates[i].passed(), "");
  bool feedback = false;
  for (const auto& c : cfg.controllers) feedback |= c.mode != ControllerMode::OpenLoop;
  if (feedback) gate("closed loop A + BK Hurwitz", spectral_abscissa(a_cl) < 0, "");
  for (const auto& c : loop.controllers) {
    const std::string tag = "controller " + std::to_string(c.index + 1);
    if (c.mode == ControllerMode::SlidingIdeal)
      gate(tag + " sliding gain bound", c.sliding.beta >= beta_bound * (1 - 1e-12),
           "beta " + std::to_string(c.sliding.beta) + " vs bound " + std::to_string(beta_bound));
    if (c.mode == ControllerMode::SlidingAdaptive)
      gate(tag + " adaptive parameters positive",
           c.sliding.beta > 0 && c.sliding.sigma > 0 && c.sliding.phi > 0 && c.sliding.epsilon > 0, "");
  }
  if (any_sliding) gate("sliding Lyapunov certificate", sliding_certificate_holds(a_cl, p), "");
  if (any_sliding && loop.unknown_input) {
    bool ok = true;
    std::string detail;
    try {
      matched_witness(b_all, loop.unknown_input->b_v);
    } catch (const Error& e) {
      ok = false;
      detail = e.what();
    }
    gate("matched unknown input", ok, detail);
  }
  return out;
}

inline void require_gates(const AssembledScenario& s) {
  for (const auto& g : s.gates)
    if (!g.passed) throw PreconditionViolated(g.name + (g.detail.empty() ? "" : " (" + g.detail + ")"));
}

inline RunOptions run_options(const IntegratorConfig& ic) { return {ic.horizon, ic.step, ic.stride, 1e9}; }

inline TrajectoryRecord run_scenario(const AssembledScenario& s) {
  require_gates(s);
  Simulator sim(s.loop);
  return sim.run(run_options(s.config.integrator));
}

}  // namespace dobc
