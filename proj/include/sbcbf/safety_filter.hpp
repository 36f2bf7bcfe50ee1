#pragma once

#include <chrono>
#include <functional>
#include <vector>

#include "sbcbf/barrier.hpp"
#include "sbcbf/distance.hpp"
#include "sbcbf/dynamics.hpp"
#include "sbcbf/errors.hpp"
#include "sbcbf/qp.hpp"

namespace sbcbf {

// Robustness variants for the CBF inequality:
//   Nominal:          <zeta, f + g u> + alpha(b) >= 0
//   UnstructuredBound: ... - ||zeta|| D(x,t)        (state-space disturbance)
//   InputErrorBound:   ... - ||zeta^T g|| E(x,t)    (input tracking error)
struct RobustnessSpec {
  enum class Kind { Nominal, UnstructuredBound, InputErrorBound };
  Kind kind = Kind::Nominal;
  std::function<double(const Vec&, double)> bound;  // D or E; nullptr for Nominal

  static RobustnessSpec nominal() { return {}; }
  static RobustnessSpec unstructured(double d_const) {
    return {Kind::UnstructuredBound, [d_const](const Vec&, double) { return d_const; }};
  }
  static RobustnessSpec input_error(double e_const) {
    return {Kind::InputErrorBound, [e_const](const Vec&, double) { return e_const; }};
  }
};

// One constraint per active gradient zeta_i:
//   (zeta_i^T g(x)) u + zeta_i^T f(x) - margin_i + alpha(b) >= 0.
inline std::vector<SafetyConstraint> build_constraints(
    const Vec& x, double t, const DistanceEvaluation& eval, double b,
    const ControlAffineModel& model, const AlphaFunction& alpha,
    const RobustnessSpec& robust, const BarrierConfig& cfg) {
  if (!in_domain(b, cfg))
    throw OutsideDomain("barrier value left the domain (-r_bar, inf)");
  if (eval.gradients.empty()) throw EmptySampleSet("no active gradients");

  const Vec fx = model.f(x);
  const Mat gx = model.g(x);
  std::vector<SafetyConstraint> constraints;
  constraints.reserve(eval.gradients.size());
  for (const Vec& zeta : eval.gradients) {
    SafetyConstraint con;
    con.a = vecmat(zeta, gx);
    double margin = 0.0;
    if (robust.kind == RobustnessSpec::Kind::UnstructuredBound) {
      const double d_bound = robust.bound(x, t);
      if (d_bound < 0.0) throw ValidationError("disturbance bound must be non-negative");
      margin = norm(zeta) * d_bound;
    } else if (robust.kind == RobustnessSpec::Kind::InputErrorBound) {
      const double e_bound = robust.bound(x, t);
      if (e_bound < 0.0) throw ValidationError("input error bound must be non-negative");
      margin = norm(con.a) * e_bound;
    }
    con.c = dot(zeta, fx) - margin + alpha(b);
    constraints.push_back(std::move(con));
  }
  return constraints;
}

// Full pipeline: distance -> barrier -> constraints -> QP, with wall-clock
// timing split between assembly and QP solve.
inline FilterResult filter(const Vec& x, double t, const RobotBody& body,
                           const std::vector<Vec2>& obstacle_points,
                           const BarrierConfig& cfg, double activation_tolerance,
                           const ControlAffineModel& model, const AlphaFunction& alpha,
                           const RobustnessSpec& robust, const Vec& u_d) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const DistanceEvaluation eval = evaluate_distance(x, body, obstacle_points, activation_tolerance);
  const double b = barrier_value(eval, cfg);
  const auto constraints = build_constraints(x, t, eval, b, model, alpha, robust, cfg);
  const auto t1 = clock::now();
  FilterResult result = solve_filter_qp(u_d, constraints);
  const auto t2 = clock::now();
  result.assemble_time = std::chrono::duration<double>(t1 - t0).count();
  result.solve_time = std::chrono::duration<double>(t2 - t1).count();
  return result;
}

}  // namespace sbcbf
