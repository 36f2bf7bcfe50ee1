#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "sbcbf/errors.hpp"
#include "sbcbf/linalg.hpp"

namespace sbcbf {

// One linear inequality in input space: feasible iff a . u + c >= 0.
struct SafetyConstraint {
  Vec a;
  double c = 0.0;

  double slack(const Vec& u) const { return dot(a, u) + c; }
};

struct FilterResult {
  Vec u_star;
  std::vector<std::size_t> active_constraints;  // indices binding at the optimum
  std::vector<double> multipliers;              // KKT multipliers for active_constraints
  bool modified = false;
  double solve_time = 0.0;     // seconds, QP solve only
  double assemble_time = 0.0;  // seconds, constraint assembly
};

// Closed-form projection of u_d onto a single half-space a.u + c >= 0.
inline Vec project_halfspace(const Vec& u_d, const SafetyConstraint& con) {
  const double s = con.slack(u_d);
  if (s >= 0.0) return u_d;
  const double a2 = dot(con.a, con.a);
  if (a2 <= 0.0) throw InfeasibleQp("zero constraint normal with negative offset");
  Vec u = u_d;
  axpy(-s / a2, con.a, u);
  return u;
}

// Projection of u_d onto the polyhedron {u : a_i . u + c_i >= 0} via a dual
// active-set iteration (Goldfarb-Idnani specialized to an identity Hessian).
// Exact at termination; infeasibility is reported, never relaxed.
inline FilterResult solve_filter_qp(const Vec& u_d,
                                    const std::vector<SafetyConstraint>& constraints) {
  FilterResult result;
  result.u_star = u_d;
  if (constraints.empty()) return result;

  const std::size_t n = u_d.size();
  const std::size_t m = constraints.size();
  for (const auto& con : constraints)
    if (con.a.size() != n) throw DimensionMismatch("constraint dimension mismatch");

  Vec u = u_d;
  std::vector<std::size_t> work;   // active working set
  std::vector<double> lambda;      // multipliers for the working set

  const double viol_tol = 1e-12;
  const std::size_t max_iter = 100 * (m + 1) * (n + 1);
  std::size_t iter = 0;
  bool touched = false;

  while (true) {
    if (++iter > max_iter) throw NumericalFailure("active-set iteration did not terminate");

    // Most violated constraint not in the working set.
    std::size_t p = m;
    double worst = -viol_tol;
    for (std::size_t i = 0; i < m; ++i) {
      if (std::find(work.begin(), work.end(), i) != work.end()) continue;
      const double s = constraints[i].slack(u);
      if (s < worst) {
        worst = s;
        p = i;
      }
    }
    if (p == m) break;  // all satisfied

    touched = true;
    const Vec& ap = constraints[p].a;
    double sp = constraints[p].slack(u);
    double lambda_p = 0.0;

    while (true) {
      if (++iter > max_iter) throw NumericalFailure("active-set iteration did not terminate");

      // Step directions: z is a_p projected onto the null space of the
      // active normals, r the dual direction.
      Vec r(work.size(), 0.0);
      Vec z = ap;
      if (!work.empty()) {
        Mat gram(work.size(), work.size());
        Vec rhs(work.size(), 0.0);
        for (std::size_t i = 0; i < work.size(); ++i) {
          rhs[i] = dot(constraints[work[i]].a, ap);
          for (std::size_t j = 0; j < work.size(); ++j)
            gram(i, j) = dot(constraints[work[i]].a, constraints[work[j]].a);
        }
        Mat lower;
        if (!cholesky(gram, lower))
          throw NumericalFailure("ill-conditioned active constraint set");
        r = cholesky_solve(lower, rhs);
        for (std::size_t i = 0; i < work.size(); ++i) axpy(-r[i], constraints[work[i]].a, z);
      }
      const double z2 = dot(z, z);
      const double norm_ap2 = dot(ap, ap);
      const bool z_zero = z2 <= 1e-24 * std::max(1.0, norm_ap2);

      // Dual blocking step.
      double t1 = std::numeric_limits<double>::infinity();
      std::size_t blocker = work.size();
      for (std::size_t i = 0; i < work.size(); ++i) {
        if (r[i] > 1e-14) {
          const double t = lambda[i] / r[i];
          if (t < t1) {
            t1 = t;
            blocker = i;
          }
        }
      }
      // Primal step to feasibility of constraint p.
      const double t2 = z_zero ? std::numeric_limits<double>::infinity() : -sp / z2;

      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) throw InfeasibleQp("constraint polyhedron is empty");

      for (std::size_t i = 0; i < work.size(); ++i) lambda[i] -= t * r[i];
      lambda_p += t;
      if (!z_zero) {
        axpy(t, z, u);
        sp += t * z2;
      }

      if (t2 <= t1) {
        work.push_back(p);
        lambda.push_back(lambda_p);
        break;
      }
      work.erase(work.begin() + static_cast<long>(blocker));
      lambda.erase(lambda.begin() + static_cast<long>(blocker));
    }
  }

  result.u_star = touched ? u : u_d;  // untouched path returns u_d bit-exactly
  result.modified = false;
  for (std::size_t i = 0; i < n; ++i)
    if (std::fabs(result.u_star[i] - u_d[i]) > 1e-12) result.modified = true;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (lambda[i] > 1e-12) {
      result.active_constraints.push_back(work[i]);
      result.multipliers.push_back(lambda[i]);
    }
  }
  return result;
}

}  // namespace sbcbf
