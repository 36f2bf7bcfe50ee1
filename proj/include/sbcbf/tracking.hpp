#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <variant>
#include <vector>

#include "sbcbf/dynamics.hpp"
#include "sbcbf/errors.hpp"
#include "sbcbf/linalg.hpp"

namespace sbcbf {

struct PidGains {
  double kp = 0.5;
  double ki = 0.01;
  double kd = 0.1;
  double integral_clamp = 10.0;

  void validate() const {
    if (!(kp > 0.0)) throw ValidationError("kp must be positive");
    if (ki < 0.0 || kd < 0.0) throw ValidationError("ki and kd must be non-negative");
    if (!(integral_clamp > 0.0)) throw ValidationError("integral_clamp must be positive");
  }
};

struct GoalPoint {
  Vec x_goal;
};

struct Waypoints {
  std::vector<double> times;
  std::vector<Vec> states;
};

struct AnalyticReference {
  std::function<Vec(double)> fn;
};

using ReferenceTrajectory = std::variant<GoalPoint, Waypoints, AnalyticReference>;

inline Vec reference_at(const ReferenceTrajectory& ref, double t) {
  if (const auto* goal = std::get_if<GoalPoint>(&ref)) return goal->x_goal;
  if (const auto* an = std::get_if<AnalyticReference>(&ref)) return an->fn(t);
  const auto& wp = std::get<Waypoints>(ref);
  if (wp.times.empty()) throw ValidationError("waypoint list is empty");
  if (t <= wp.times.front()) return wp.states.front();
  if (t >= wp.times.back()) return wp.states.back();
  for (std::size_t i = 1; i < wp.times.size(); ++i) {
    if (t <= wp.times[i]) {
      const double span = wp.times[i] - wp.times[i - 1];
      const double w = span > 0.0 ? (t - wp.times[i - 1]) / span : 1.0;
      Vec out = wp.states[i - 1];
      for (std::size_t k = 0; k < out.size(); ++k)
        out[k] += w * (wp.states[i][k] - out[k]);
      return out;
    }
  }
  return wp.states.back();
}

struct PidState {
  Vec integral;
  Vec prev_error;
  bool has_prev = false;
};

// Task-space PID force v = kp e + ki int(e) + kd de/dt, mapped to inputs via
// the right pseudoinverse of g (exact inverse when g is square).
inline std::pair<Vec, PidState> pid_control(const PidGains& gains,
                                            const ControlAffineModel& model, const Vec& x,
                                            const Vec& x_d, double dt, PidState state) {
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  const std::size_t n = x.size();
  if (x_d.size() != n) throw DimensionMismatch("reference dimension mismatch");
  if (state.integral.size() != n) state.integral.assign(n, 0.0);

  Vec e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = x_d[i] - x[i];

  Vec edot(n, 0.0);
  if (state.has_prev)
    for (std::size_t i = 0; i < n; ++i) edot[i] = (e[i] - state.prev_error[i]) / dt;

  for (std::size_t i = 0; i < n; ++i) {
    state.integral[i] += e[i] * dt;
    state.integral[i] =
        std::clamp(state.integral[i], -gains.integral_clamp, gains.integral_clamp);
  }

  Vec v(n);
  const Vec fx = model.f(x);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = gains.kp * e[i] + gains.ki * state.integral[i] + gains.kd * edot[i] - fx[i];

  Vec u_d = right_pinv_apply(model.g(x), v);

  state.prev_error = std::move(e);
  state.has_prev = true;
  return {std::move(u_d), std::move(state)};
}

// ---------------------------------------------------------------------------
// KL-tracking diagnostic: exponential envelope fit on an obstacle-free
// (unmodified) log segment. A surrogate report, not a proof.
// ---------------------------------------------------------------------------

struct TrackingSample {
  double t = 0.0;
  double error_norm = 0.0;
  bool modified = false;
};

struct TrackingFit {
  double c = 0.0;       // envelope gain
  double lambda = 0.0;  // decay rate, 1/s; <= 0 means no decay observed
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t samples = 0;
};

inline TrackingFit tracking_diagnostic(const std::vector<TrackingSample>& log) {
  // Longest contiguous run of unmodified steps with positive error.
  std::size_t best_begin = 0, best_len = 0, begin = 0, len = 0;
  for (std::size_t i = 0; i <= log.size(); ++i) {
    const bool ok = i < log.size() && !log[i].modified && log[i].error_norm > 1e-12;
    if (ok) {
      if (len == 0) begin = i;
      ++len;
      if (len > best_len) {
        best_len = len;
        best_begin = begin;
      }
    } else {
      len = 0;
    }
  }
  if (best_len < 3) throw NoCleanSegment("no unmodified log segment long enough to fit");

  // Least squares on ln||e(t)|| = ln(c ||e0||) - lambda t.
  const double t0 = log[best_begin].t;
  const double e0 = log[best_begin].error_norm;
  double sum_t = 0, sum_y = 0, sum_tt = 0, sum_ty = 0;
  for (std::size_t i = best_begin; i < best_begin + best_len; ++i) {
    const double t = log[i].t - t0;
    const double y = std::log(log[i].error_norm);
    sum_t += t;
    sum_y += y;
    sum_tt += t * t;
    sum_ty += t * y;
  }
  const double m = static_cast<double>(best_len);
  const double denom = m * sum_tt - sum_t * sum_t;
  TrackingFit fit;
  fit.samples = best_len;
  fit.t_start = t0;
  fit.t_end = log[best_begin + best_len - 1].t;
  if (denom <= 0.0) {
    fit.lambda = 0.0;
    fit.c = 1.0;
    return fit;
  }
  const double slope = (m * sum_ty - sum_t * sum_y) / denom;
  const double intercept = (sum_y - slope * sum_t) / m;
  fit.lambda = -slope;
  fit.c = std::exp(intercept) / e0;
  return fit;
}

}  // namespace sbcbf
