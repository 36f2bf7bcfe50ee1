#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

#include "sbcbf/errors.hpp"
#include "sbcbf/geometry.hpp"
#include "sbcbf/linalg.hpp"

namespace sbcbf {

struct ControlAffineModel {
  std::size_t n_x = 0;
  std::size_t n_u = 0;
  std::function<Vec(const Vec&)> f;
  std::function<Mat(const Vec&)> g;
  bool full_row_rank_certified = false;

  // g(x) g(x)^T must stay invertible at every visited state.
  double rank_condition(const Vec& x) const {
    const Mat gx = g(x);
    Mat ggt(n_x, n_x);
    for (std::size_t i = 0; i < n_x; ++i)
      for (std::size_t j = 0; j < n_x; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n_u; ++k) s += gx(i, k) * gx(j, k);
        ggt(i, j) = s;
      }
    return spd_condition(ggt);
  }
};

// Single-integrator velocity model: f = 0, g = I.
inline ControlAffineModel integrator_model(std::size_t n) {
  ControlAffineModel m;
  m.n_x = m.n_u = n;
  m.f = [n](const Vec&) { return Vec(n, 0.0); };
  m.g = [n](const Vec&) { return Mat::identity(n); };
  m.full_row_rank_certified = true;
  return m;
}

// ---------------------------------------------------------------------------
// Omnidirectional three-wheeled robot: xdot = G(x) (B^T)^{-1} u with state
// (x1, x2, heading) and wheel angular velocities as inputs.
// ---------------------------------------------------------------------------

struct OmniRobotModel {
  double body_radius = 0.2;   // l
  double wheel_radius = 0.02; // r

  Mat wheel_matrix() const {
    const double r = wheel_radius, l = body_radius;
    const double c = std::cos(std::numbers::pi / 6.0);
    const double s = std::sin(std::numbers::pi / 6.0);
    Mat b(3, 3);
    b(0, 0) = 0.0;    b(0, 1) = r * c;  b(0, 2) = -r * c;
    b(1, 0) = -r;     b(1, 1) = r * s;  b(1, 2) = r * s;
    b(2, 0) = l * r;  b(2, 1) = l * r;  b(2, 2) = l * r;
    return b;
  }

  static Mat rotation_block(double heading) {
    Mat g(3, 3);
    g(0, 0) = std::cos(heading); g(0, 1) = -std::sin(heading);
    g(1, 0) = std::sin(heading); g(1, 1) = std::cos(heading);
    g(2, 2) = 1.0;
    return g;
  }
};

inline Mat omni_g(const Vec& x, const Mat& bt_inv) {
  return matmul(OmniRobotModel::rotation_block(x[2]), bt_inv);
}

inline ControlAffineModel omni_model(const OmniRobotModel& omni = {}) {
  ControlAffineModel m;
  m.n_x = m.n_u = 3;
  // B is constant; precompute (B^T)^{-1} once.
  const Mat bt_inv = inverse(transpose(omni.wheel_matrix()));
  m.f = [](const Vec&) { return Vec(3, 0.0); };
  m.g = [bt_inv](const Vec& x) { return omni_g(x, bt_inv); };
  m.full_row_rank_certified = true;
  return m;
}

// ---------------------------------------------------------------------------
// Disturbances
// ---------------------------------------------------------------------------

struct DisturbanceModel {
  enum class Kind { None, UniformBox, InputError };
  Kind kind = Kind::None;
  Vec half_width;  // per coordinate; state space for UniformBox, input space for InputError
  std::uint64_t seed = 0;

  double norm_bound() const { return norm(half_width); }
};

// Per-step disturbance draw, i.i.d. per coordinate, reproducible from
// (seed, step_index) independent of call order.
inline Vec sample_disturbance(const DisturbanceModel& dm, std::size_t dim,
                              std::size_t step_index) {
  Vec d(dim, 0.0);
  if (dm.kind == DisturbanceModel::Kind::None) return d;
  for (std::size_t i = 0; i < dim; ++i) {
    const double u01 =
        detail::uniform01(dm.seed, static_cast<std::uint64_t>(step_index) * dim + i);
    const double hw = i < dm.half_width.size() ? dm.half_width[i] : 0.0;
    d[i] = (2.0 * u01 - 1.0) * hw;
  }
  return d;
}

// Classical fixed-step RK4 on xdot = f(x) + g(x) u + d, with u and d held
// constant over the step.
inline Vec step_rk4(const ControlAffineModel& model, const Vec& x, const Vec& u,
                    const Vec& d_sample, double dt) {
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  auto deriv = [&](const Vec& state) {
    Vec xdot = model.f(state);
    const Vec gu = matvec(model.g(state), u);
    for (std::size_t i = 0; i < xdot.size(); ++i) {
      xdot[i] += gu[i];
      if (i < d_sample.size()) xdot[i] += d_sample[i];
    }
    return xdot;
  };
  const Vec k1 = deriv(x);
  Vec x2 = x;
  axpy(0.5 * dt, k1, x2);
  const Vec k2 = deriv(x2);
  Vec x3 = x;
  axpy(0.5 * dt, k2, x3);
  const Vec k3 = deriv(x3);
  Vec x4 = x;
  axpy(dt, k3, x4);
  const Vec k4 = deriv(x4);

  Vec out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(out[i])) throw NonFiniteState("non-finite state after RK4 step");
  }
  return out;
}

}  // namespace sbcbf
