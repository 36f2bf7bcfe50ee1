#pragma once

#include <cmath>

#include "sbcbf/distance.hpp"
#include "sbcbf/errors.hpp"

namespace sbcbf {

// Units note: b, epsilon, gamma, r_bar are all squared distances (m^2);
// the guaranteed clearance sqrt(gamma) is a plain distance (m).
struct BarrierConfig {
  double epsilon = 0.0;  // certified sampling error
  double gamma = 0.0;    // user safety margin
  double r_bar = 0.0;    // domain parameter, 0 < r_bar < epsilon + gamma

  double r() const { return epsilon + gamma; }

  void validate() const {
    if (epsilon < 0.0) throw ValidationError("epsilon must be non-negative");
    if (gamma < 0.0) throw ValidationError("gamma must be non-negative");
    if (!(r() > 0.0)) throw ValidationError("epsilon + gamma must be positive");
    if (!(r_bar > 0.0 && r_bar < r()))
      throw ValidationError("r_bar must satisfy 0 < r_bar < epsilon + gamma");
  }
};

struct AlphaFunction {
  enum class Kind { Linear, Cubic };
  Kind kind = Kind::Linear;
  double k = 1.0;

  double operator()(double s) const {
    if (kind == Kind::Cubic) return k * s * s * s;
    return k * s;
  }

  void validate() const {
    if (!(k > 0.0)) throw ValidationError("alpha gain k must be positive");
  }
};

inline double barrier_value(const DistanceEvaluation& eval, const BarrierConfig& cfg) {
  return eval.min_squared - cfg.epsilon - cfg.gamma;
}

inline double barrier_value(double min_squared, const BarrierConfig& cfg) {
  return min_squared - cfg.epsilon - cfg.gamma;
}

inline bool is_safe(double b) { return b >= 0.0; }

inline bool in_domain(double b, const BarrierConfig& cfg) { return b > -cfg.r_bar; }

// Certified lower bound on the true distance between the continuous shapes
// whenever b >= 0.
inline double margin_implication(double b, double gamma) {
  if (b < 0.0) throw NotSafe("margin implication requires b >= 0");
  return std::sqrt(gamma);
}

}  // namespace sbcbf
