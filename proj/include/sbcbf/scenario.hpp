#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sbcbf/barrier.hpp"
#include "sbcbf/distance.hpp"
#include "sbcbf/dynamics.hpp"
#include "sbcbf/errors.hpp"
#include "sbcbf/geometry.hpp"
#include "sbcbf/safety_filter.hpp"
#include "sbcbf/tracking.hpp"

namespace sbcbf {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct SamplerSpec {
  enum class Technique { Grid, Uniform };
  Technique technique = Technique::Uniform;
  std::size_t n = 100;
  std::uint64_t seed = 0;
};

struct RobustnessConfig {
  RobustnessSpec::Kind kind = RobustnessSpec::Kind::Nominal;
  double bound = 0.0;  // constant D or E

  RobustnessSpec spec() const {
    switch (kind) {
      case RobustnessSpec::Kind::UnstructuredBound:
        return RobustnessSpec::unstructured(bound);
      case RobustnessSpec::Kind::InputErrorBound:
        return RobustnessSpec::input_error(bound);
      default:
        return RobustnessSpec::nominal();
    }
  }
};

struct ScenarioConfig {
  // Model
  std::string model_type = "omni";  // "omni" | "integrator"
  double omni_body_radius = 0.2;
  double omni_wheel_radius = 0.02;
  std::size_t integrator_dim = 3;

  // Geometry. The workspace rectangle is mandatory; its boundary becomes a
  // virtual obstacle so the safe set is compact.
  Rectangle workspace{{0, 0}, {10, 10}};
  std::vector<Shape> obstacles;
  Shape body_shape = Disc{{0, 0}, 0.2};  // in the body frame (offsets)
  bool body_is_point = false;            // single offset at the origin

  SamplerSpec sampler;            // body and obstacle shapes
  SamplerSpec workspace_sampler{SamplerSpec::Technique::Grid, 800, 0};

  double gamma = 0.05;
  double r_bar_factor = 0.5;          // r_bar = factor * (epsilon + gamma)
  double activation_tolerance = 1e-8;
  AlphaFunction alpha;
  RobustnessConfig robustness;
  DisturbanceModel disturbance;
  PidGains gains;

  Vec start;
  Vec goal;
  std::vector<double> waypoint_times;  // optional; goal used when empty
  std::vector<Vec> waypoint_states;

  double dt = 0.01;
  double t_end = 100.0;
  std::size_t log_every = 100;
  std::size_t oracle_density = 20;  // resampling factor for the true-distance oracle
};

// ---------------------------------------------------------------------------
// JSON (de)serialization
// ---------------------------------------------------------------------------

namespace detail {

inline Vec2 parse_vec2(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2)
    throw ParseError("field '" + field + "' must be a 2-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json dump_vec2(Vec2 v) { return json::array({v.x, v.y}); }

inline Shape parse_shape(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "disc")
    return Disc{parse_vec2(j.at("center"), "center"), j.at("radius").get<double>()};
  if (type == "rectangle")
    return Rectangle{parse_vec2(j.at("min"), "min"), parse_vec2(j.at("max"), "max")};
  if (type == "union_of_discs") {
    UnionOfDiscs u;
    for (const auto& dj : j.at("discs"))
      u.discs.push_back({parse_vec2(dj.at("center"), "center"), dj.at("radius").get<double>()});
    return u;
  }
  if (type == "polygon") {
    Polygon p;
    for (const auto& vj : j.at("vertices")) p.vertices.push_back(parse_vec2(vj, "vertices"));
    return p;
  }
  throw ParseError("unknown shape type '" + type + "'");
}

inline json dump_shape(const Shape& s) {
  json j;
  if (const auto* d = std::get_if<Disc>(&s)) {
    j["type"] = "disc";
    j["center"] = dump_vec2(d->center);
    j["radius"] = d->radius;
  } else if (const auto* r = std::get_if<Rectangle>(&s)) {
    j["type"] = "rectangle";
    j["min"] = dump_vec2(r->min_corner);
    j["max"] = dump_vec2(r->max_corner);
  } else if (const auto* u = std::get_if<UnionOfDiscs>(&s)) {
    j["type"] = "union_of_discs";
    j["discs"] = json::array();
    for (const auto& d : u->discs)
      j["discs"].push_back({{"center", dump_vec2(d.center)}, {"radius", d.radius}});
  } else {
    const auto& p = std::get<Polygon>(s);
    j["type"] = "polygon";
    j["vertices"] = json::array();
    for (const auto& v : p.vertices) j["vertices"].push_back(dump_vec2(v));
  }
  return j;
}

inline SamplerSpec parse_sampler(const json& j) {
  SamplerSpec s;
  const std::string technique = j.value("technique", "uniform");
  if (technique == "grid")
    s.technique = SamplerSpec::Technique::Grid;
  else if (technique == "uniform")
    s.technique = SamplerSpec::Technique::Uniform;
  else
    throw ParseError("sampler technique must be 'grid' or 'uniform'");
  s.n = j.value("n", std::size_t{100});
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

inline json dump_sampler(const SamplerSpec& s) {
  return {{"technique", s.technique == SamplerSpec::Technique::Grid ? "grid" : "uniform"},
          {"n", s.n},
          {"seed", s.seed}};
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const json& j) {
  ScenarioConfig cfg;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    cfg.model_type = m.value("type", std::string("omni"));
    cfg.omni_body_radius = m.value("l", 0.2);
    cfg.omni_wheel_radius = m.value("wheel_radius", 0.02);
    cfg.integrator_dim = m.value("n", std::size_t{3});
  }
  if (!j.contains("workspace"))
    throw ValidationError("workspace required for compact safe set");
  cfg.workspace = {detail::parse_vec2(j.at("workspace").at("min"), "workspace.min"),
                   detail::parse_vec2(j.at("workspace").at("max"), "workspace.max")};
  for (const auto& oj : j.value("obstacles", json::array()))
    cfg.obstacles.push_back(detail::parse_shape(oj));
  if (j.contains("robot_body")) {
    const auto& bj = j.at("robot_body");
    if (bj.value("type", std::string()) == "point") {
      cfg.body_is_point = true;
    } else {
      cfg.body_shape = detail::parse_shape(bj);
    }
  }
  if (j.contains("sampler")) cfg.sampler = detail::parse_sampler(j.at("sampler"));
  if (j.contains("workspace_sampler"))
    cfg.workspace_sampler = detail::parse_sampler(j.at("workspace_sampler"));
  if (j.contains("barrier")) {
    const auto& bj = j.at("barrier");
    cfg.gamma = bj.value("gamma", 0.05);
    cfg.r_bar_factor = bj.value("r_bar_factor", 0.5);
    cfg.activation_tolerance = bj.value("activation_tolerance", 1e-8);
  }
  if (j.contains("alpha")) {
    const auto& aj = j.at("alpha");
    const std::string type = aj.value("type", "linear");
    if (type == "linear")
      cfg.alpha.kind = AlphaFunction::Kind::Linear;
    else if (type == "cubic")
      cfg.alpha.kind = AlphaFunction::Kind::Cubic;
    else
      throw ParseError("alpha type must be 'linear' or 'cubic'");
    cfg.alpha.k = aj.value("k", 1.0);
  }
  if (j.contains("robustness")) {
    const auto& rj = j.at("robustness");
    const std::string type = rj.value("type", "nominal");
    if (type == "nominal") {
      cfg.robustness.kind = RobustnessSpec::Kind::Nominal;
    } else if (type == "unstructured") {
      cfg.robustness.kind = RobustnessSpec::Kind::UnstructuredBound;
      cfg.robustness.bound = rj.at("D").get<double>();
    } else if (type == "input_error") {
      cfg.robustness.kind = RobustnessSpec::Kind::InputErrorBound;
      cfg.robustness.bound = rj.at("E").get<double>();
    } else {
      throw ParseError("robustness type must be 'nominal', 'unstructured' or 'input_error'");
    }
  }
  if (j.contains("disturbance")) {
    const auto& dj = j.at("disturbance");
    const std::string type = dj.value("type", "none");
    if (type == "none") {
      cfg.disturbance.kind = DisturbanceModel::Kind::None;
    } else if (type == "uniform_box" || type == "input_error_box") {
      cfg.disturbance.kind = type == "uniform_box" ? DisturbanceModel::Kind::UniformBox
                                                   : DisturbanceModel::Kind::InputError;
      for (const auto& h : dj.at("half_width")) cfg.disturbance.half_width.push_back(h.get<double>());
      cfg.disturbance.seed = dj.value("seed", std::uint64_t{0});
    } else {
      throw ParseError("disturbance type must be 'none', 'uniform_box' or 'input_error_box'");
    }
  }
  if (j.contains("controller")) {
    const auto& cj = j.at("controller");
    cfg.gains.kp = cj.value("kp", 0.5);
    cfg.gains.ki = cj.value("ki", 0.01);
    cfg.gains.kd = cj.value("kd", 0.1);
    cfg.gains.integral_clamp = cj.value("integral_clamp", 10.0);
  }
  cfg.start = j.at("start").get<Vec>();
  if (j.contains("reference")) {
    const auto& rj = j.at("reference");
    const std::string type = rj.value("type", "goal");
    if (type == "goal") {
      cfg.goal = rj.at("x").get<Vec>();
    } else if (type == "waypoints") {
      for (const auto& pj : rj.at("points")) {
        cfg.waypoint_times.push_back(pj.at("t").get<double>());
        cfg.waypoint_states.push_back(pj.at("x").get<Vec>());
      }
      cfg.goal = cfg.waypoint_states.back();
    } else {
      throw ParseError("reference type must be 'goal' or 'waypoints'");
    }
  } else {
    throw ValidationError("reference trajectory required");
  }
  cfg.dt = j.value("dt", 0.01);
  cfg.t_end = j.value("t_end", 100.0);
  cfg.log_every = j.value("log_every", std::size_t{100});
  cfg.oracle_density = j.value("oracle_density", std::size_t{20});
  return cfg;
}

inline json serialize_scenario(const ScenarioConfig& cfg) {
  json j;
  j["model"] = {{"type", cfg.model_type}};
  if (cfg.model_type == "omni") {
    j["model"]["l"] = cfg.omni_body_radius;
    j["model"]["wheel_radius"] = cfg.omni_wheel_radius;
  } else {
    j["model"]["n"] = cfg.integrator_dim;
  }
  j["workspace"] = {{"min", detail::dump_vec2(cfg.workspace.min_corner)},
                    {"max", detail::dump_vec2(cfg.workspace.max_corner)}};
  j["obstacles"] = json::array();
  for (const auto& s : cfg.obstacles) j["obstacles"].push_back(detail::dump_shape(s));
  j["robot_body"] = cfg.body_is_point ? json{{"type", "point"}} : detail::dump_shape(cfg.body_shape);
  j["sampler"] = detail::dump_sampler(cfg.sampler);
  j["workspace_sampler"] = detail::dump_sampler(cfg.workspace_sampler);
  j["barrier"] = {{"gamma", cfg.gamma},
                  {"r_bar_factor", cfg.r_bar_factor},
                  {"activation_tolerance", cfg.activation_tolerance}};
  j["alpha"] = {{"type", cfg.alpha.kind == AlphaFunction::Kind::Linear ? "linear" : "cubic"},
                {"k", cfg.alpha.k}};
  switch (cfg.robustness.kind) {
    case RobustnessSpec::Kind::Nominal:
      j["robustness"] = {{"type", "nominal"}};
      break;
    case RobustnessSpec::Kind::UnstructuredBound:
      j["robustness"] = {{"type", "unstructured"}, {"D", cfg.robustness.bound}};
      break;
    case RobustnessSpec::Kind::InputErrorBound:
      j["robustness"] = {{"type", "input_error"}, {"E", cfg.robustness.bound}};
      break;
  }
  switch (cfg.disturbance.kind) {
    case DisturbanceModel::Kind::None:
      j["disturbance"] = {{"type", "none"}};
      break;
    case DisturbanceModel::Kind::UniformBox:
    case DisturbanceModel::Kind::InputError:
      j["disturbance"] = {
          {"type", cfg.disturbance.kind == DisturbanceModel::Kind::UniformBox ? "uniform_box"
                                                                              : "input_error_box"},
          {"half_width", cfg.disturbance.half_width},
          {"seed", cfg.disturbance.seed}};
      break;
  }
  j["controller"] = {{"kp", cfg.gains.kp},
                     {"ki", cfg.gains.ki},
                     {"kd", cfg.gains.kd},
                     {"integral_clamp", cfg.gains.integral_clamp}};
  j["start"] = cfg.start;
  if (cfg.waypoint_times.empty()) {
    j["reference"] = {{"type", "goal"}, {"x", cfg.goal}};
  } else {
    j["reference"] = {{"type", "waypoints"}, {"points", json::array()}};
    for (std::size_t i = 0; i < cfg.waypoint_times.size(); ++i)
      j["reference"]["points"].push_back(
          {{"t", cfg.waypoint_times[i]}, {"x", cfg.waypoint_states[i]}});
  }
  j["dt"] = cfg.dt;
  j["t_end"] = cfg.t_end;
  j["log_every"] = cfg.log_every;
  j["oracle_density"] = cfg.oracle_density;
  return j;
}

inline void validate_scenario(const ScenarioConfig& cfg) {
  validate_shape(Shape{cfg.workspace});
  for (const auto& s : cfg.obstacles) validate_shape(s);
  if (!cfg.body_is_point) validate_shape(cfg.body_shape);
  if (cfg.sampler.n < 3 || cfg.workspace_sampler.n < 3)
    throw ValidationError("sampler n must be at least 3");
  if (cfg.gamma < 0.0) throw ValidationError("gamma must be non-negative");
  if (!(cfg.r_bar_factor > 0.0 && cfg.r_bar_factor < 1.0))
    throw ValidationError("r_bar_factor must lie in (0,1)");
  if (!(cfg.t_end > 0.0)) throw ValidationError("t_end must be positive");
  if (!(cfg.dt > 0.0)) throw ValidationError("dt must be positive");
  if (cfg.log_every == 0) throw ValidationError("log_every must be positive");
  cfg.alpha.validate();
  cfg.gains.validate();
  const std::size_t n_x = cfg.model_type == "integrator" ? cfg.integrator_dim : 3;
  if (cfg.start.size() != n_x) throw ValidationError("start dimension does not match model");
  if (!cfg.waypoint_times.empty() && cfg.waypoint_times.size() != cfg.waypoint_states.size())
    throw ValidationError("waypoint times/states length mismatch");
  if (cfg.model_type != "omni" && cfg.model_type != "integrator")
    throw ValidationError("model type must be 'omni' or 'integrator'");
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario JSON parse error: ") + e.what());
  }
  ScenarioConfig cfg = parse_scenario(j);
  validate_scenario(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Scenario setup: sampled and certified geometry plus the model
// ---------------------------------------------------------------------------

struct ScenarioSetup {
  ControlAffineModel model;
  RobotBody body;
  std::vector<SampledShape> obstacle_samples;  // per obstacle, workspace last
  std::vector<Shape> obstacle_shapes;          // matching order, workspace last
  std::vector<Vec2> merged_obstacle_points;
  BarrierConfig barrier;
  double rho_body = 0.0;
  double rho_obstacles = 0.0;  // max over obstacle shapes (incl. workspace)
};

namespace detail {

inline SampledShape sample_with(const Shape& shape, const SamplerSpec& spec,
                                std::uint64_t seed_offset) {
  SampledShape s = spec.technique == SamplerSpec::Technique::Grid
                       ? sample_boundary_grid(shape, spec.n)
                       : sample_boundary_uniform(shape, spec.n, spec.seed + seed_offset);
  return certify_rho(s, shape, default_validation_n(s.points.size()));
}

}  // namespace detail

inline ScenarioSetup build_setup(const ScenarioConfig& cfg) {
  ScenarioSetup setup;
  setup.model = cfg.model_type == "integrator" ? integrator_model(cfg.integrator_dim)
                                               : omni_model({cfg.omni_body_radius,
                                                             cfg.omni_wheel_radius});

  if (cfg.body_is_point) {
    SampledShape pt;
    pt.points = {{0.0, 0.0}};
    pt.rho = 0.0;
    pt.epsilon = 0.0;
    setup.body.offset_set = pt;
  } else {
    setup.body.offset_set = detail::sample_with(cfg.body_shape, cfg.sampler, 1);
  }
  setup.rho_body = setup.body.offset_set.rho.value_or(0.0);

  for (std::size_t i = 0; i < cfg.obstacles.size(); ++i) {
    setup.obstacle_shapes.push_back(cfg.obstacles[i]);
    setup.obstacle_samples.push_back(detail::sample_with(cfg.obstacles[i], cfg.sampler, 2 + i));
  }
  setup.obstacle_shapes.push_back(Shape{cfg.workspace});
  setup.obstacle_samples.push_back(
      detail::sample_with(Shape{cfg.workspace}, cfg.workspace_sampler, 0));

  double rho_max = 0.0;
  for (const auto& s : setup.obstacle_samples) {
    rho_max = std::max(rho_max, s.rho.value_or(0.0));
    setup.merged_obstacle_points.insert(setup.merged_obstacle_points.end(), s.points.begin(),
                                        s.points.end());
  }
  setup.rho_obstacles = rho_max;

  // Combined certificate across the body net and the worst obstacle net.
  setup.barrier.epsilon = 2.0 * (setup.rho_body + setup.rho_obstacles);
  setup.barrier.gamma = cfg.gamma;
  setup.barrier.r_bar = cfg.r_bar_factor * setup.barrier.r();
  setup.barrier.validate();
  return setup;
}

// True-distance surrogate: both shapes re-sampled at `density` times the
// scenario sample count; quality ~ epsilon / density.
struct DistanceOracle {
  std::vector<Vec2> body_offsets;
  std::vector<Vec2> obstacle_points;
  std::array<std::size_t, 2> position_indices = {0, 1};

  double distance_at(const Vec& x) const {
    const Vec2 p{x[position_indices[0]], x[position_indices[1]]};
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& e : body_offsets) {
      const Vec2 v = p + e;
      for (const Vec2& o : obstacle_points) {
        const double dx = v.x - o.x, dy = v.y - o.y;
        best = std::min(best, dx * dx + dy * dy);
      }
    }
    return std::sqrt(best);
  }
};

inline DistanceOracle build_oracle(const ScenarioConfig& cfg, const ScenarioSetup& setup) {
  DistanceOracle oracle;
  oracle.position_indices = setup.body.position_indices;
  if (cfg.body_is_point) {
    oracle.body_offsets = {{0.0, 0.0}};
  } else {
    oracle.body_offsets =
        sample_boundary_grid(cfg.body_shape, cfg.sampler.n * cfg.oracle_density).points;
  }
  for (std::size_t i = 0; i < setup.obstacle_shapes.size(); ++i) {
    const bool is_workspace = i + 1 == setup.obstacle_shapes.size();
    const std::size_t base_n = is_workspace ? cfg.workspace_sampler.n : cfg.sampler.n;
    const auto fine =
        sample_boundary_grid(setup.obstacle_shapes[i], base_n * cfg.oracle_density);
    oracle.obstacle_points.insert(oracle.obstacle_points.end(), fine.points.begin(),
                                  fine.points.end());
  }
  return oracle;
}

// ---------------------------------------------------------------------------
// Closed-loop simulation
// ---------------------------------------------------------------------------

struct LogRecord {
  double t = 0.0;
  Vec x;
  double b = 0.0;
  Vec u_d;
  Vec u_star;
  bool modified = false;
  std::size_t active_count = 0;
  double d_sampled = 0.0;
  std::optional<double> d_oracle;
  double qp_time = 0.0;
  double assemble_time = 0.0;
};

enum class RunStatus { Ok, InfeasibleSteps, LeftDomain };

struct TrajectoryLog {
  std::vector<LogRecord> records;
  RunStatus status = RunStatus::Ok;
  std::size_t infeasible_steps = 0;
  std::size_t abort_step = 0;  // step index when status == LeftDomain
  double epsilon_certified = 0.0;
  double rho_body = 0.0;
  double rho_obstacles = 0.0;
  std::size_t body_samples = 0;
  std::size_t obstacle_samples = 0;
  double mean_qp_time = 0.0;
  double mean_assemble_time = 0.0;
  double controller_lipschitz_estimate = 0.0;  // max ||du*|| / ||dx|| diagnostic
  std::string config_hash;
};

namespace detail {

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace detail

struct RunOptions {
  bool oracle_check = false;
};

inline TrajectoryLog run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {}) {
  validate_scenario(cfg);
  const ScenarioSetup setup = build_setup(cfg);
  std::optional<DistanceOracle> oracle;
  if (opts.oracle_check) oracle = build_oracle(cfg, setup);

  ReferenceTrajectory ref =
      cfg.waypoint_times.empty()
          ? ReferenceTrajectory{GoalPoint{cfg.goal}}
          : ReferenceTrajectory{Waypoints{cfg.waypoint_times, cfg.waypoint_states}};
  const RobustnessSpec robust = cfg.robustness.spec();

  TrajectoryLog log;
  log.epsilon_certified = setup.barrier.epsilon;
  log.rho_body = setup.rho_body;
  log.rho_obstacles = setup.rho_obstacles;
  log.body_samples = setup.body.offset_set.points.size();
  log.obstacle_samples = setup.merged_obstacle_points.size();
  log.config_hash = detail::fnv1a_hex(serialize_scenario(cfg).dump());

  const std::size_t steps = static_cast<std::size_t>(std::llround(cfg.t_end / cfg.dt));
  Vec x = cfg.start;
  PidState pid;
  Vec prev_u_star, prev_x;
  double qp_total = 0.0, assemble_total = 0.0;
  std::size_t filter_calls = 0;

  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    const Vec x_d = reference_at(ref, t);
    auto [u_d, pid_next] = pid_control(cfg.gains, setup.model, x, x_d, cfg.dt, std::move(pid));
    pid = std::move(pid_next);

    FilterResult fr;
    double b = 0.0;
    std::size_t active_count = 0;
    double d_sampled = 0.0;
    bool infeasible = false;
    try {
      using clock = std::chrono::steady_clock;
      const auto t0 = clock::now();
      const DistanceEvaluation eval =
          evaluate_distance(x, setup.body, setup.merged_obstacle_points, cfg.activation_tolerance);
      b = barrier_value(eval, setup.barrier);
      d_sampled = std::sqrt(std::max(eval.min_squared, 0.0));
      active_count = eval.active.size();
      const auto constraints =
          build_constraints(x, t, eval, b, setup.model, cfg.alpha, robust, setup.barrier);
      const auto t1 = clock::now();
      try {
        fr = solve_filter_qp(u_d, constraints);
      } catch (const InfeasibleQp&) {
        // Surfaced, not hidden: fall back to the nominal input and flag the step.
        infeasible = true;
        fr.u_star = u_d;
        fr.modified = false;
      }
      const auto t2 = clock::now();
      fr.assemble_time = std::chrono::duration<double>(t1 - t0).count();
      fr.solve_time = std::chrono::duration<double>(t2 - t1).count();
    } catch (const OutsideDomain&) {
      log.status = RunStatus::LeftDomain;
      log.abort_step = k;
      LogRecord rec;
      rec.t = t;
      rec.x = x;
      rec.b = b;
      rec.u_d = u_d;
      rec.u_star = u_d;
      rec.d_sampled = d_sampled;
      log.records.push_back(std::move(rec));
      break;
    }
    if (infeasible) ++log.infeasible_steps;
    qp_total += fr.solve_time;
    assemble_total += fr.assemble_time;
    ++filter_calls;

    if (!prev_u_star.empty()) {
      const double dx_norm = norm(sub(x, prev_x));
      if (dx_norm > 1e-12) {
        const double du = norm(sub(fr.u_star, prev_u_star));
        log.controller_lipschitz_estimate =
            std::max(log.controller_lipschitz_estimate, du / dx_norm);
      }
    }
    prev_u_star = fr.u_star;
    prev_x = x;

    if (k % cfg.log_every == 0) {
      LogRecord rec;
      rec.t = t;
      rec.x = x;
      rec.b = b;
      rec.u_d = u_d;
      rec.u_star = fr.u_star;
      rec.modified = fr.modified;
      rec.active_count = active_count;
      rec.d_sampled = d_sampled;
      if (oracle) rec.d_oracle = oracle->distance_at(x);
      rec.qp_time = fr.solve_time;
      rec.assemble_time = fr.assemble_time;
      log.records.push_back(std::move(rec));
    }
    if (k == steps) break;

    // Applied input: structured error perturbs the input, unstructured
    // disturbance perturbs the state derivative.
    Vec u_app = fr.u_star;
    Vec d_state(x.size(), 0.0);
    if (cfg.disturbance.kind == DisturbanceModel::Kind::InputError) {
      const Vec e = sample_disturbance(cfg.disturbance, u_app.size(), k);
      for (std::size_t i = 0; i < u_app.size(); ++i) u_app[i] += e[i];
    } else if (cfg.disturbance.kind == DisturbanceModel::Kind::UniformBox) {
      d_state = sample_disturbance(cfg.disturbance, x.size(), k);
    }
    x = step_rk4(setup.model, x, u_app, d_state, cfg.dt);
  }

  if (filter_calls > 0) {
    log.mean_qp_time = qp_total / static_cast<double>(filter_calls);
    log.mean_assemble_time = assemble_total / static_cast<double>(filter_calls);
  }
  if (log.status == RunStatus::Ok && log.infeasible_steps > 0)
    log.status = RunStatus::InfeasibleSteps;
  return log;
}

// ---------------------------------------------------------------------------
// Trade-off study (deadlock scenario): conservatism and compute cost vs n
// ---------------------------------------------------------------------------

struct TradeoffRow {
  std::size_t n_samples = 0;
  double epsilon = 0.0;
  double min_sampled_distance = 0.0;  // settled d(Vbar, Obar) at the deadlock
  double mean_qp_time = 0.0;
  double mean_filter_time = 0.0;  // assembly + QP
};

struct TradeoffReport {
  std::vector<TradeoffRow> rows;  // sorted by epsilon ascending
};

inline TradeoffReport run_tradeoff(const ScenarioConfig& base_cfg,
                                   const std::vector<std::size_t>& sample_counts) {
  TradeoffReport report;
  // Timing rows are measured serially, one run at a time.
  for (std::size_t n : sample_counts) {
    ScenarioConfig cfg = base_cfg;
    cfg.sampler.technique = SamplerSpec::Technique::Grid;
    cfg.sampler.n = n;
    cfg.workspace_sampler.technique = SamplerSpec::Technique::Grid;
    cfg.workspace_sampler.n = n;
    const TrajectoryLog log = run_scenario(cfg);
    if (log.records.empty()) throw NumericalFailure("tradeoff run produced no records");
    TradeoffRow row;
    row.n_samples = n;
    row.epsilon = log.epsilon_certified;
    row.min_sampled_distance = log.records.back().d_sampled;
    row.mean_qp_time = log.mean_qp_time;
    row.mean_filter_time = log.mean_qp_time + log.mean_assemble_time;
    report.rows.push_back(row);
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const TradeoffRow& a, const TradeoffRow& b) { return a.epsilon < b.epsilon; });
  return report;
}

// ---------------------------------------------------------------------------
// CSV and SVG output
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt12(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace detail

inline void emit_csv(const TrajectoryLog& log, std::ostream& out) {
  if (log.records.empty()) throw IoError("cannot emit CSV for an empty log");
  const std::size_t n_x = log.records.front().x.size();
  const std::size_t n_u = log.records.front().u_d.size();
  out << "t";
  for (std::size_t i = 1; i <= n_x; ++i) out << ",x" << i;
  out << ",b";
  for (std::size_t i = 1; i <= n_u; ++i) out << ",ud" << i;
  for (std::size_t i = 1; i <= n_u; ++i) out << ",u" << i;
  out << ",modified,active_count,d_sampled,d_oracle,qp_time_s,assemble_time_s\n";
  for (const auto& rec : log.records) {
    out << detail::fmt12(rec.t);
    for (double v : rec.x) out << "," << detail::fmt12(v);
    out << "," << detail::fmt12(rec.b);
    for (double v : rec.u_d) out << "," << detail::fmt12(v);
    for (double v : rec.u_star) out << "," << detail::fmt12(v);
    out << "," << (rec.modified ? 1 : 0) << "," << rec.active_count << ","
        << detail::fmt12(rec.d_sampled) << ",";
    if (rec.d_oracle) out << detail::fmt12(*rec.d_oracle);
    else out << "nan";
    out << "," << detail::fmt12(rec.qp_time) << "," << detail::fmt12(rec.assemble_time) << "\n";
  }
}

inline void emit_csv(const TrajectoryLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path);
  emit_csv(log, out);
}

inline void emit_csv(const TradeoffReport& report, std::ostream& out) {
  out << "n_samples,epsilon,min_sampled_distance,mean_qp_time_s,mean_filter_time_s\n";
  for (const auto& row : report.rows)
    out << row.n_samples << "," << detail::fmt12(row.epsilon) << ","
        << detail::fmt12(row.min_sampled_distance) << "," << detail::fmt12(row.mean_qp_time)
        << "," << detail::fmt12(row.mean_filter_time) << "\n";
}

inline void emit_csv(const TradeoffReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path);
  emit_csv(report, out);
}

namespace detail {

struct SvgMapper {
  double x0, x1, y0, y1;  // data range
  double px, py, pw, ph;  // pixel box
  double sx(double x) const { return px + (x - x0) / (x1 - x0) * pw; }
  double sy(double y) const { return py + ph - (y - y0) / (y1 - y0) * ph; }
};

inline void svg_polyline(std::ostream& out, const SvgMapper& m,
                         const std::vector<std::pair<double, double>>& pts,
                         const std::string& color) {
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
  for (const auto& [x, y] : pts) out << m.sx(x) << "," << m.sy(y) << " ";
  out << "\"/>\n";
}

}  // namespace detail

// Line plots of b(t) and the inputs plus an overhead view of the trajectory
// with obstacle outlines.
inline void emit_svg_plot(const TrajectoryLog& log, const ScenarioConfig& cfg,
                          const std::string& path) {
  if (log.records.empty()) throw IoError("cannot plot an empty log");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path);

  const double width = 1260, height = 420;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const double t_min = log.records.front().t, t_max = log.records.back().t;

  // Panel 1: overhead trajectory.
  {
    detail::SvgMapper m{cfg.workspace.min_corner.x, cfg.workspace.max_corner.x,
                        cfg.workspace.min_corner.y, cfg.workspace.max_corner.y,
                        20, 20, 380, 380};
    out << "<rect x=\"" << m.px << "\" y=\"" << m.py << "\" width=\"" << m.pw
        << "\" height=\"" << m.ph << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (const auto& shape : cfg.obstacles) {
      if (const auto* d = std::get_if<Disc>(&shape)) {
        out << "<circle cx=\"" << m.sx(d->center.x) << "\" cy=\"" << m.sy(d->center.y)
            << "\" r=\"" << d->radius / (m.x1 - m.x0) * m.pw
            << "\" fill=\"none\" stroke=\"red\"/>\n";
      } else if (const auto* r = std::get_if<Rectangle>(&shape)) {
        out << "<rect x=\"" << m.sx(r->min_corner.x) << "\" y=\"" << m.sy(r->max_corner.y)
            << "\" width=\"" << (r->max_corner.x - r->min_corner.x) / (m.x1 - m.x0) * m.pw
            << "\" height=\"" << (r->max_corner.y - r->min_corner.y) / (m.y1 - m.y0) * m.ph
            << "\" fill=\"none\" stroke=\"red\"/>\n";
      } else if (const auto* u = std::get_if<UnionOfDiscs>(&shape)) {
        for (const auto& d : u->discs)
          out << "<circle cx=\"" << m.sx(d.center.x) << "\" cy=\"" << m.sy(d.center.y)
              << "\" r=\"" << d.radius / (m.x1 - m.x0) * m.pw
              << "\" fill=\"none\" stroke=\"red\"/>\n";
      } else if (const auto* p = std::get_if<Polygon>(&shape)) {
        out << "<polygon fill=\"none\" stroke=\"red\" points=\"";
        for (const auto& v : p->vertices) out << m.sx(v.x) << "," << m.sy(v.y) << " ";
        out << "\"/>\n";
      }
    }
    std::vector<std::pair<double, double>> path_pts;
    for (const auto& rec : log.records) path_pts.emplace_back(rec.x[0], rec.x[1]);
    detail::svg_polyline(out, m, path_pts, "blue");
  }

  // Panel 2: b(t).
  {
    double b_min = 0.0, b_max = 0.0;
    for (const auto& rec : log.records) {
      b_min = std::min(b_min, rec.b);
      b_max = std::max(b_max, rec.b);
    }
    if (b_max <= b_min) b_max = b_min + 1.0;
    detail::SvgMapper m{t_min, std::max(t_max, t_min + 1e-9), b_min, b_max, 440, 20, 380, 380};
    out << "<rect x=\"" << m.px << "\" y=\"" << m.py << "\" width=\"" << m.pw
        << "\" height=\"" << m.ph << "\" fill=\"none\" stroke=\"black\"/>\n";
    std::vector<std::pair<double, double>> pts;
    for (const auto& rec : log.records) pts.emplace_back(rec.t, rec.b);
    detail::svg_polyline(out, m, pts, "green");
    detail::svg_polyline(out, m, {{t_min, 0.0}, {t_max, 0.0}}, "gray");
  }

  // Panel 3: inputs, one polyline per coordinate (u_d dashed is omitted;
  // nominal drawn in light gray, filtered in color).
  {
    double u_min = 0.0, u_max = 0.0;
    for (const auto& rec : log.records)
      for (std::size_t i = 0; i < rec.u_star.size(); ++i) {
        u_min = std::min({u_min, rec.u_star[i], rec.u_d[i]});
        u_max = std::max({u_max, rec.u_star[i], rec.u_d[i]});
      }
    if (u_max <= u_min) u_max = u_min + 1.0;
    detail::SvgMapper m{t_min, std::max(t_max, t_min + 1e-9), u_min, u_max, 860, 20, 380, 380};
    out << "<rect x=\"" << m.px << "\" y=\"" << m.py << "\" width=\"" << m.pw
        << "\" height=\"" << m.ph << "\" fill=\"none\" stroke=\"black\"/>\n";
    const std::size_t n_u = log.records.front().u_star.size();
    const std::vector<std::string> colors = {"blue", "green", "purple", "orange"};
    for (std::size_t i = 0; i < n_u; ++i) {
      std::vector<std::pair<double, double>> nom, fil;
      for (const auto& rec : log.records) {
        nom.emplace_back(rec.t, rec.u_d[i]);
        fil.emplace_back(rec.t, rec.u_star[i]);
      }
      detail::svg_polyline(out, m, nom, "lightgray");
      detail::svg_polyline(out, m, fil, colors[i % colors.size()]);
    }
  }
  out << "</svg>\n";
}

}  // namespace sbcbf
