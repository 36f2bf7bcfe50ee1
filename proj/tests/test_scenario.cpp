#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sbcbf/scenario.hpp"

using namespace sbcbf;

namespace {

json minimal_json() {
  return json::parse(R"({
    "model": {"type": "integrator", "n": 2},
    "workspace": {"min": [0, 0], "max": [4, 4]},
    "obstacles": [],
    "robot_body": {"type": "point"},
    "sampler": {"technique": "grid", "n": 20},
    "workspace_sampler": {"technique": "grid", "n": 50},
    "start": [1.0, 1.0],
    "reference": {"type": "goal", "x": [3.0, 3.0]},
    "t_end": 5.0
  })");
}

ScenarioConfig quick_integrator_config() {
  ScenarioConfig cfg = parse_scenario(minimal_json());
  cfg.log_every = 10;
  return cfg;
}

}  // namespace

TEST_CASE("minimal config picks up documented defaults") {
  const ScenarioConfig cfg = parse_scenario(minimal_json());
  CHECK(cfg.dt == 0.01);
  CHECK(cfg.alpha.kind == AlphaFunction::Kind::Linear);
  CHECK(cfg.alpha.k == 1.0);
  CHECK(cfg.r_bar_factor == 0.5);
  CHECK(cfg.gamma == 0.05);
  CHECK(cfg.activation_tolerance == 1e-8);
  CHECK(cfg.gains.kp == 0.5);
  CHECK(cfg.log_every == 100);
  CHECK(cfg.robustness.kind == RobustnessSpec::Kind::Nominal);
  CHECK(cfg.disturbance.kind == DisturbanceModel::Kind::None);
  CHECK_NOTHROW(validate_scenario(cfg));
}

TEST_CASE("missing workspace is a validation error") {
  json j = minimal_json();
  j.erase("workspace");
  CHECK_THROWS_AS(parse_scenario(j), ValidationError);
  try {
    parse_scenario(j);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("workspace required") != std::string::npos);
  }
}

TEST_CASE("malformed fields raise ParseError naming the field") {
  json j = minimal_json();
  j["obstacles"] = json::array({{{"type", "hexagon"}}});
  CHECK_THROWS_AS(parse_scenario(j), ParseError);
}

TEST_CASE("invariants are validated") {
  {
    json j = minimal_json();
    j["t_end"] = 0.0;
    CHECK_THROWS_AS(validate_scenario(parse_scenario(j)), ValidationError);
  }
  {
    json j = minimal_json();
    j["sampler"]["n"] = 2;
    CHECK_THROWS_AS(validate_scenario(parse_scenario(j)), ValidationError);
  }
  {
    json j = minimal_json();
    j["barrier"] = {{"gamma", -0.1}};
    CHECK_THROWS_AS(validate_scenario(parse_scenario(j)), ValidationError);
  }
  {
    json j = minimal_json();
    j["start"] = {1.0, 1.0, 0.0};  // 3 entries for a 2D integrator
    CHECK_THROWS_AS(validate_scenario(parse_scenario(j)), ValidationError);
  }
}

TEST_CASE("config round-trips through serialize/parse") {
  for (const std::string name :
       {"nonconvex_l.json", "deadlock_wall.json", "input_error_robust.json"}) {
    const ScenarioConfig a = load_scenario(std::string(SCENARIO_DIR) + "/" + name);
    const ScenarioConfig b = parse_scenario(serialize_scenario(a));
    CHECK(serialize_scenario(a) == serialize_scenario(b));
  }
}

TEST_CASE("obstacle-free run is pure passthrough and reaches the goal") {
  ScenarioConfig cfg = quick_integrator_config();
  cfg.t_end = 60.0;
  cfg.gains.ki = 0.0;  // the integral mode settles too slowly for a tight check
  const TrajectoryLog log = run_scenario(cfg);
  CHECK(log.status == RunStatus::Ok);
  for (const auto& rec : log.records) {
    CHECK_FALSE(rec.modified);
    CHECK(rec.b > 0.0);
    for (std::size_t i = 0; i < rec.u_d.size(); ++i) CHECK(rec.u_star[i] == rec.u_d[i]);
  }
  const auto& last = log.records.back();
  CHECK(std::hypot(last.x[0] - 3.0, last.x[1] - 3.0) < 1e-2);
}

TEST_CASE("record count follows the logging invariant") {
  ScenarioConfig cfg = quick_integrator_config();
  cfg.t_end = 5.0;
  cfg.log_every = 7;
  const TrajectoryLog log = run_scenario(cfg);
  const std::size_t expect = static_cast<std::size_t>(5.0 / (0.01 * 7)) + 1;
  CHECK(log.records.size() == expect);
  for (std::size_t i = 1; i < log.records.size(); ++i)
    CHECK(log.records[i].t > log.records[i - 1].t);
}

TEST_CASE("CSV has the documented schema and one row per record") {
  ScenarioConfig cfg = quick_integrator_config();
  cfg.t_end = 0.3;
  cfg.log_every = 10;
  const TrajectoryLog log = run_scenario(cfg);
  std::ostringstream out;
  emit_csv(log, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "t,x1,x2,b,ud1,ud2,u1,u2,modified,active_count,d_sampled,d_oracle,qp_time_s,"
        "assemble_time_s");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == log.records.size());
  CHECK(out.str().find("\r") == std::string::npos);  // LF only
}

TEST_CASE("identical config and seeds give byte-identical CSV minus timing columns") {
  ScenarioConfig cfg = quick_integrator_config();
  cfg.disturbance.kind = DisturbanceModel::Kind::UniformBox;
  cfg.disturbance.half_width = {0.05, 0.05};
  cfg.disturbance.seed = 123;
  cfg.t_end = 3.0;

  auto stripped_csv = [&] {
    std::ostringstream out;
    emit_csv(run_scenario(cfg), out);
    // Drop the last two (timing) columns of every line.
    std::istringstream in(out.str());
    std::ostringstream kept;
    std::string line;
    while (std::getline(in, line)) {
      auto cut = line.rfind(',');
      cut = line.rfind(',', cut - 1);
      kept << line.substr(0, cut) << "\n";
    }
    return kept.str();
  };
  const std::string a = stripped_csv();
  const std::string b = stripped_csv();
  CHECK(a == b);
}

TEST_CASE("SVG plot contains one polyline per input coordinate") {
  ScenarioConfig cfg = quick_integrator_config();
  cfg.t_end = 1.0;
  const TrajectoryLog log = run_scenario(cfg);
  const std::string path = "test_scenario_plot.svg";
  emit_svg_plot(log, cfg, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string svg = ss.str();
  std::size_t polylines = 0;
  for (std::size_t pos = 0; (pos = svg.find("<polyline", pos)) != std::string::npos; ++pos)
    ++polylines;
  // trajectory + b(t) + zero line + (nominal + filtered) per input
  CHECK(polylines == 3 + 2 * cfg.integrator_dim);
  CHECK(svg.find("<svg") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("tradeoff rows are sorted by epsilon and epsilon shrinks with n") {
  ScenarioConfig cfg = quick_integrator_config();
  // Pin the robot against the top wall so it settles at the boundary.
  cfg.goal = {2.0, 9.0};
  cfg.t_end = 20.0;
  const TradeoffReport report = run_tradeoff(cfg, {25, 50, 100});
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].n_samples == 100);
  CHECK(report.rows[1].n_samples == 50);
  CHECK(report.rows[2].n_samples == 25);
  CHECK(report.rows[0].epsilon < report.rows[1].epsilon);
  CHECK(report.rows[1].epsilon < report.rows[2].epsilon);
  std::ostringstream out;
  emit_csv(report, out);
  CHECK(out.str().find("n_samples,epsilon,min_sampled_distance") == 0);
}

TEST_CASE("states outside the domain abort with LeftDomain status") {
  ScenarioConfig cfg = quick_integrator_config();
  json j = serialize_scenario(cfg);
  // Boundary passes ~0.05 from the start, well inside the -r_bar shell.
  j["obstacles"] = json::array({{{"type", "disc"}, {"center", {1.45, 1.0}}, {"radius", 0.5}}});
  cfg = parse_scenario(j);
  const TrajectoryLog log = run_scenario(cfg);
  CHECK(log.status == RunStatus::LeftDomain);
  CHECK(log.abort_step == 0);
}

TEST_CASE("run metadata records the certificate") {
  ScenarioConfig cfg = quick_integrator_config();
  cfg.t_end = 0.5;
  const TrajectoryLog log = run_scenario(cfg);
  CHECK(log.epsilon_certified > 0.0);
  CHECK(log.epsilon_certified == 2.0 * (log.rho_body + log.rho_obstacles));
  CHECK(log.body_samples == 1);
  CHECK(log.obstacle_samples == 50);
  CHECK_FALSE(log.config_hash.empty());
}
