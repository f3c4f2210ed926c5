// dobc: run, decompose, check and accept distributed observer scenarios.
// Exit codes: 0 pass, 1 acceptance failure, 2 config/validation error, 3 divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dobc/acceptance.hpp"

namespace fs = std::filesystem;
using namespace dobc;

namespace {

enum Exit { kPass = 0, kFail = 1, kConfig = 2, kDiverged = 3 };

struct Overrides {
  std::optional<double> horizon, step;
  std::optional<std::size_t> stride;
};

bool is_builtin(const std::string& s) {
  for (const auto& n : builtin_names())
    if (n == s) return true;
  return s == "example3-ideal";
}

ScenarioConfig load(const std::string& what, const Overrides& o) {
  ScenarioConfig cfg;
  if (is_builtin(what)) {
    cfg = builtin_scenario(what);
  } else {
    std::ifstream in(what);
    if (!in) throw IoError("cannot read '" + what + "' (not a file or built-in scenario)");
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = parse_config(ss.str());
  }
  if (o.horizon) cfg.integrator.horizon = *o.horizon;
  if (o.step) cfg.integrator.step = *o.step;
  if (o.stride) cfg.integrator.stride = *o.stride;
  validate_config(cfg);
  return cfg;
}

fs::path scenario_dir(const std::string& out, const std::string& name) {
  fs::path dir = fs::path(out) / name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
}

void print_checks(const RunSummary& s) {
  std::cout << s.scenario << " [" << s.digest << "]: " << (s.passed() ? "PASS" : "FAIL") << "\n";
  for (const auto& g : s.gates)
    if (!g.passed) std::cout << "  gate failed: " << g.name << " " << g.detail << "\n";
  for (const auto& c : s.checks)
    std::cout << "  " << (c.passed ? "ok   " : "FAIL ") << c.name << " = " << c.value << " (" << c.relation << " "
              << c.threshold << ")\n";
  if (!s.error.empty()) std::cout << "  error: " << s.error << "\n";
}

Json matrix_out(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

int cmd_run(const std::string& what, const Overrides& o, const std::string& out) {
  ScenarioConfig cfg = load(what, o);
  AssembledScenario as = assemble(cfg);
  require_gates(as);
  RunSummary summary;
  summary.scenario = cfg.name;
  summary.digest = config_digest(cfg);
  summary.gates = as.gates;
  TrajectoryRecord rec = run_scenario(as);
  summary.metrics = metrics(rec);
  bool judged = false;
  if (cfg.name != "example3-ideal" && is_builtin(cfg.name)) {
    std::optional<TrajectoryRecord> ideal;
    if (cfg.name == "example3") ideal = run_scenario(assemble(ideal_sliding_variant(cfg)));
    summary.checks = scenario_checks(cfg.name, rec, as.loop, ideal ? &*ideal : nullptr);
    judged = true;
  }
  fs::path dir = scenario_dir(out, cfg.name.empty() ? "scenario" : cfg.name);
  emit_csv(rec, (dir / "trajectory.csv").string());
  write_text(dir / "summary.json", to_json(summary).dump(2) + "\n");
  if (judged) print_checks(summary);
  std::cout << "wrote " << (dir / "trajectory.csv").string() << " (" << rec.samples.size() << " samples)\n";
  return judged && !summary.passed() ? kFail : kPass;
}

int cmd_decompose(const std::string& what, const Overrides& o) {
  ScenarioConfig cfg = load(what, o);
  AssembledScenario as = assemble(cfg);
  Json nodes = Json::array();
  for (std::size_t i = 0; i < as.loop.observers.size(); ++i) {
    const Quadruplet& q = as.loop.observers[i].quad;
    Json checks = Json::array();
    for (const auto& c : as.certificates[i].checks)
      checks.push_back({{"name", c.name}, {"residual", c.residual}, {"passed", c.passed}});
    nodes.push_back({{"node", i + 1},
                     {"mode", to_string(q.mode)},
                     {"delta", q.delta()},
                     {"rho", q.rho},
                     {"transient_gain", q.transient_gain},
                     {"T", matrix_out(q.t)},
                     {"E", matrix_out(q.e)},
                     {"F", matrix_out(q.f)},
                     {"G", matrix_out(q.g)},
                     {"certificate", checks},
                     {"certificate_passed", as.certificates[i].passed()}});
  }
  std::cout << Json{{"scenario", cfg.name}, {"observers", nodes}}.dump(2) << "\n";
  for (const auto& rep : as.certificates)
    if (!rep.passed()) return kFail;
  return kPass;
}

int cmd_check(const std::string& what, const Overrides& o) {
  ScenarioConfig cfg = load(what, o);
  AssembledScenario as = assemble(cfg);
  for (const auto& g : as.gates)
    std::cout << (g.passed ? "ok   " : "FAIL ") << g.name << (g.detail.empty() ? "" : "  " + g.detail) << "\n";
  return as.gates_pass() ? kPass : kConfig;
}

int cmd_accept(std::vector<std::string> names, const Overrides& o, const std::string& out) {
  if (names.empty()) names = builtin_names();
  AcceptanceOptions opt{o.horizon, o.step, o.stride};
  Json all = Json::array();
  bool ok = true;
  int code = kPass;
  for (const auto& n : names) {
    AcceptanceRun run;
    try {
      run = run_acceptance_one(n, opt);
    } catch (const Diverged& e) {
      std::cout << n << ": diverged at t = " << e.time << "\n";
      code = kDiverged;
      continue;
    }
    fs::path dir = scenario_dir(out, n);
    emit_csv(run.record, (dir / "trajectory.csv").string());
    if (run.companion) emit_csv(*run.companion, (dir / "trajectory_ideal.csv").string());
    write_text(dir / "summary.json", to_json(run.summary).dump(2) + "\n");
    print_checks(run.summary);
    all.push_back(to_json(run.summary));
    ok = ok && run.summary.passed();
  }
  write_text(scenario_dir(out, ".") / "summary.json", all.dump(2) + "\n");
  if (code != kPass) return code;
  return ok ? kPass : kFail;
}

int cmd_export(const std::string& what, const std::string& file) {
  ScenarioConfig cfg = load(what, {});
  std::string text = serialize_config(cfg);
  if (file.empty()) std::cout << text;
  else write_text(file, text);
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed observer-based control scenarios"};
  app.require_subcommand(1);
  Overrides ov;
  std::string out = "out";
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--horizon", ov.horizon, "simulation horizon");
    sub->add_option("--step", ov.step, "RK4 step size");
    sub->add_option("--stride", ov.stride, "record every stride-th step");
  };

  std::string target;
  auto* run = app.add_subcommand("run", "simulate a config file or built-in scenario");
  run->add_option("scenario", target, "config path or built-in name")->required();
  add_run_flags(run);
  run->add_option("--out", out, "output directory");

  auto* dec = app.add_subcommand("decompose", "print observer quadruplets and certificates");
  dec->add_option("scenario", target, "config path or built-in name")->required();

  auto* chk = app.add_subcommand("check", "evaluate the assumption gates only");
  chk->add_option("scenario", target, "config path or built-in name")->required();

  std::vector<std::string> names;
  auto* acc = app.add_subcommand("accept", "run built-in scenarios against the acceptance thresholds");
  acc->add_option("names", names, "built-in scenarios (default: all)");
  add_run_flags(acc);
  acc->add_option("--out", out, "output directory");

  std::string file;
  auto* exp = app.add_subcommand("export", "write a scenario as a config file");
  exp->add_option("scenario", target, "config path or built-in name")->required();
  exp->add_option("--out", file, "destination file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kPass : kConfig;
  }

  try {
    if (*run) return cmd_run(target, ov, out);
    if (*dec) return cmd_decompose(target, ov);
    if (*chk) return cmd_check(target, ov);
    if (*acc) return cmd_accept(names, ov, out);
    if (*exp) return cmd_export(target, file);
  } catch (const Diverged& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kConfig;
}
