#include <catch2/catch.hpp>

#include <sstream>

#include "dobc/acceptance.hpp"
#include "dobc/report.hpp"

using namespace dobc;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::string csv_of(const TrajectoryRecord& rec) {
  std::ostringstream os;
  write_csv(rec, os);
  return os.str();
}

}  // namespace

TEST_CASE("built-in configs survive a serialization round trip") {
  for (const auto& name : builtin_names()) {
    INFO(name);
    ScenarioConfig cfg = builtin_scenario(name);
    ScenarioConfig back = parse_config(serialize_config(cfg));
    CHECK(back == cfg);
    CHECK(config_digest(back) == config_digest(cfg));
  }
  ScenarioConfig ideal = builtin_scenario("example3-ideal");
  CHECK(parse_config(serialize_config(ideal)) == ideal);
}

TEST_CASE("digest tracks content") {
  ScenarioConfig a = builtin_scenario("example2");
  ScenarioConfig b = builtin_scenario("example2");
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_digest(a).size() == 16);
  b.integrator.step = 5e-4;
  CHECK_FALSE(a == b);
  CHECK(config_digest(a) != config_digest(b));
}

TEST_CASE("a non-square A is a validation error") {
  Json j = to_json(builtin_scenario("example2"));
  for (auto& row : j["plant"]["A"]) row.erase(row.size() - 1);
  try {
    from_json(j);
    FAIL("accepted");
  } catch (const ValidationError& e) {
    bool found = false;
    for (const auto& p : e.problems) found = found || p.find("A not square") != std::string::npos;
    CHECK(found);
  }
}

TEST_CASE("validation collects every problem") {
  ScenarioConfig cfg = builtin_scenario("example2");
  cfg.x0 = Vector::Zero(3);
  cfg.integrator.stride = 0;
  cfg.edges.push_back({0, 0, 1.0});
  auto p = validation_problems(cfg);
  CHECK(p.size() >= 3);
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  CHECK(validation_problems(builtin_scenario("example3")).empty());
}

TEST_CASE("parse errors carry the JSON path") {
  Json j = to_json(builtin_scenario("example2"));
  j["plant"]["A"][2][4] = "one";
  try {
    from_json(j);
    FAIL("accepted");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("/plant/A/2/4") != std::string::npos);
  }
  Json ragged = to_json(builtin_scenario("example2"));
  ragged["plant"]["A"][3].erase(0);
  CHECK_THROWS_AS(from_json(ragged), ParseError);
  CHECK_THROWS_AS(parse_config("{\"format\": 1,"), ParseError);
  Json missing = to_json(builtin_scenario("example1"));
  missing.erase("plant");
  CHECK_THROWS_WITH(from_json(missing), Catch::Contains("plant"));
}

TEST_CASE("unknown scenarios") {
  CHECK_THROWS_AS(builtin_scenario("example9"), UnknownScenario);
  CHECK_THROWS_AS(run_acceptance({"example9"}), UnknownScenario);
  ScenarioConfig cfg = builtin_scenario("example1");
  TrajectoryRecord rec;
  CHECK_THROWS_AS(scenario_checks("nope", rec, assemble(cfg).loop, nullptr), UnknownScenario);
}

TEST_CASE("nine-state network layout") {
  ScenarioConfig cfg = builtin_scenario("example2");
  CHECK(cfg.a.rows() == 9);
  CHECK(cfg.a.sum() == 8.0);
  CHECK(cfg.controllers.size() == 5);
  CHECK(cfg.observers.size() == 6);
  CHECK(cfg.graph_nodes == 6);
  REQUIRE(cfg.edges.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(cfg.edges[k].i == k);
    CHECK(cfg.edges[k].j == (k + 1) % 6);
  }
  // node 6 knows the fifth controller's input, like node 5
  CHECK(cfg.observers[5].inputs == std::vector<std::size_t>{4});
  CHECK(cfg.observers[4].inputs == std::vector<std::size_t>{4});
  CHECK(cfg.channels[2].sum() == 3.0);
}

TEST_CASE("multi-agent inputs") {
  ScenarioConfig cfg = builtin_scenario("example1");
  REQUIRE(cfg.controllers.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    const Signal& s = cfg.controllers[i].signal;
    for (double t : {0.3, 1.1, 7.0}) CHECK(s(t, 1)(0) == Approx(0.5 * double(i) * std::sin(double(5 - i) * t)).margin(1e-15));
    CHECK(cfg.controllers[i].mode == ControllerMode::OpenLoop);
  }
  CHECK(cfg.a.rows() == 9);
  CHECK(cfg.observers[4].block_size == 3);
  CHECK(cfg.observers[4].block_offset == 6);
}

TEST_CASE("stabilization parameters") {
  ScenarioConfig cfg = builtin_scenario("example3");
  REQUIRE(cfg.unknown_input);
  CHECK(cfg.unknown_input->b_v.cols() == 2);
  CHECK(cfg.sliding.beta == 0.1);
  CHECK(cfg.sliding.epsilon == 0.2);
  CHECK(cfg.sliding.sigma == 0.1);
  CHECK(cfg.sliding.phi == 5.0);
  for (const auto& o : cfg.observers) {
    CHECK(o.gains.phi == 5.0);
    CHECK(o.gains.phi_s == 10.0);
    CHECK(o.gains.sigma == 0.2);
    CHECK(o.gains.sigma_s == 0.1);
  }
  for (const auto& c : cfg.controllers) CHECK(c.mode == ControllerMode::SlidingAdaptive);
  ScenarioConfig ideal = ideal_sliding_variant(cfg);
  for (const auto& c : ideal.controllers) CHECK(c.mode == ControllerMode::SlidingIdeal);
  CHECK_FALSE(ideal.sliding.beta);
}

TEST_CASE("ablation removes only the second gain") {
  ScenarioConfig base = builtin_scenario("example2"), abl = builtin_scenario("example2-ablation");
  for (std::size_t i = 0; i < base.observers.size(); ++i) {
    CHECK(abl.observers[i].gains.gamma_s0 == 0.0);
    CHECK(abl.observers[i].gains.phi_s == 0.0);
    abl.observers[i].gains.gamma_s0 = base.observers[i].gains.gamma_s0;
    abl.observers[i].gains.phi_s = base.observers[i].gains.phi_s;
  }
  abl.name = base.name;
  CHECK(abl == base);
}

TEST_CASE("gates pass for every built-in") {
  for (const auto& name : builtin_names()) {
    AssembledScenario as = assemble(builtin_scenario(name));
    INFO(name);
    CHECK(as.gates_pass());
    CHECK_NOTHROW(require_gates(as));
  }
}

TEST_CASE("csv layout") {
  TrajectoryRecord empty;
  empty.nodes = 2;
  auto only_header = lines(csv_of(empty));
  REQUIRE(only_header.size() == 1);
  CHECK(only_header[0] == "t,norm_x,err_r,err_1,err_2,eps_u_1,eps_u_2,eps_d_1,eps_d_2,gamma_1,gamma_2,gamma_s_1,gamma_s_2");

  ScenarioConfig cfg = builtin_scenario("example1");
  cfg.integrator.horizon = 0.2;
  TrajectoryRecord rec = run_scenario(assemble(cfg));
  REQUIRE(rec.samples.size() == 3);
  auto rows = lines(csv_of(rec));
  CHECK(rows.size() == 4);
  auto header = csv_header(rec);
  for (int i = 1; i <= 5; ++i) CHECK(std::find(header.begin(), header.end(), "err_" + std::to_string(i)) != header.end());
  CHECK(std::find(header.begin(), header.end(), "u_5_1") != header.end());
  for (const auto& r : rows) CHECK(std::count(r.begin(), r.end(), ',') == long(header.size() - 1));
}

TEST_CASE("truncated runs produce summaries but fail") {
  AcceptanceOptions opt;
  opt.horizon = 0.5;
  auto sums = run_acceptance(builtin_names(), opt);
  REQUIRE(sums.size() == 4);
  for (const auto& s : sums) {
    INFO(s.scenario);
    CHECK(s.error.empty());
    CHECK_FALSE(s.checks.empty());
    // the ablation asserts non-convergence, which a half-second run shows trivially
    CHECK(s.passed() == (s.scenario == "example2-ablation"));
    CHECK(s.digest.size() == 16);
    Json j = to_json(s);
    CHECK(j["scenario"] == s.scenario);
  }
}

TEST_CASE("zero horizon fails every window check") {
  AcceptanceOptions opt;
  opt.horizon = 0.0;
  RunSummary s = run_acceptance_one("example1", opt).summary;
  CHECK_FALSE(s.passed());
  for (const auto& c : s.checks)
    if (c.name == "max_err_after_25") CHECK(std::isinf(c.value));
}
