#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sbcbf/geometry.hpp"  // detail::uniform01
#include "sbcbf/qp.hpp"

using namespace sbcbf;

namespace {

double u01(std::uint64_t seed, std::uint64_t idx) { return detail::uniform01(seed, idx); }

bool feasible(const Vec& u, const std::vector<SafetyConstraint>& cons, double tol = 0.0) {
  for (const auto& c : cons)
    if (c.slack(u) < -tol) return false;
  return true;
}

// Exact oracle by exhaustive KKT enumeration: for every subset of constraints
// of size <= n, project u_d onto the affine set where those hold with
// equality, then keep the cheapest candidate that is feasible for all of
// them. Convexity guarantees the optimum shows up as one of these
// projections; rank-deficient subsets are skipped (a full-rank subset with
// the same span yields the same point).
Vec kkt_oracle(const Vec& u_d, const std::vector<SafetyConstraint>& cons) {
  const std::size_t n = u_d.size();
  const std::size_t m = cons.size();
  auto cost_of = [&](const Vec& u) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += (u[i] - u_d[i]) * (u[i] - u_d[i]);
    return c;
  };
  Vec best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<std::size_t> sel;
    for (std::size_t j = 0; j < m; ++j)
      if (mask & (1u << j)) sel.push_back(j);
    if (sel.size() > n) continue;
    Vec u = u_d;
    if (!sel.empty()) {
      const std::size_t k = sel.size();
      Mat gram(k, k);
      Vec rhs(k);
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t q = 0; q < k; ++q)
          gram(p, q) = dot(cons[sel[p]].a, cons[sel[q]].a);
        rhs[p] = -cons[sel[p]].slack(u_d);
      }
      Mat lower(k, k);
      if (!cholesky(gram, lower, 1e-10)) continue;
      const Vec lambda = cholesky_solve(lower, rhs);
      for (std::size_t p = 0; p < k; ++p) axpy(lambda[p], cons[sel[p]].a, u);
    }
    if (!feasible(u, cons, 1e-9)) continue;
    const double cost = cost_of(u);
    if (cost < best_cost) {
      best_cost = cost;
      best = u;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("half-space projection closed form") {
  const Vec u_d = {1.0, 0.0, 0.0};
  // Constraint: -x + y + 0.47 >= 0  ->  projection moves along (-1, 1)/sqrt(2).
  const SafetyConstraint con{{-1.0, 1.0, 0.0}, 0.47};
  const Vec u = project_halfspace(u_d, con);
  CHECK(u[0] == Catch::Approx(0.735));
  CHECK(u[1] == Catch::Approx(0.265));
  CHECK(u[2] == 0.0);
  CHECK(con.slack(u) == Catch::Approx(0.0).margin(1e-12));
  // Already-feasible input is untouched.
  const SafetyConstraint loose{{1.0, 0.0, 0.0}, 5.0};
  const Vec same = project_halfspace(u_d, loose);
  CHECK(same[0] == 1.0);
}

TEST_CASE("passthrough is bit-exact when u_d is feasible") {
  const Vec u_d = {0.1 + 1e-17, -0.2, 0.33333333333333331};
  std::vector<SafetyConstraint> cons = {{{1.0, 0.0, 0.0}, 1.0}, {{0.0, -1.0, 1.0}, 2.0}};
  const auto res = solve_filter_qp(u_d, cons);
  CHECK_FALSE(res.modified);
  for (std::size_t i = 0; i < 3; ++i) CHECK(res.u_star[i] == u_d[i]);
  CHECK(res.active_constraints.empty());
}

TEST_CASE("infeasible polyhedron is reported, never relaxed") {
  std::vector<SafetyConstraint> cons = {{{1.0, 0.0}, -1.0}, {{-1.0, 0.0}, -1.0}};
  CHECK_THROWS_AS(solve_filter_qp({0.0, 0.0}, cons), InfeasibleQp);
}

TEST_CASE("randomized instances match an exhaustive KKT-enumeration oracle") {
  std::size_t checked = 0;
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 3;
    const std::size_t m = 1 + trial % 4;
    std::uint64_t ctr = 0;
    auto next = [&] { return 2.0 * u01(trial + 70000, ctr++) - 1.0; };

    // Guarantee a feasible ball of radius 0.25 around a random interior point.
    Vec interior(n);
    for (auto& v : interior) v = 1.5 * next();
    std::vector<SafetyConstraint> cons;
    for (std::size_t j = 0; j < m; ++j) {
      SafetyConstraint c;
      c.a.resize(n);
      double a2 = 0.0;
      for (auto& v : c.a) {
        v = next();
        a2 += v * v;
      }
      if (a2 < 1e-6) c.a[0] = 1.0, a2 = 1.0;
      c.c = -dot(c.a, interior) + std::sqrt(a2) * 0.25;
      cons.push_back(c);
    }
    Vec u_d(n);
    for (auto& v : u_d) v = 2.0 * next();

    const auto res = solve_filter_qp(u_d, cons);

    // KKT residuals.
    CHECK(feasible(res.u_star, cons, 1e-9));
    Vec stationarity = res.u_star;
    for (std::size_t i = 0; i < n; ++i) stationarity[i] -= u_d[i];
    for (std::size_t k = 0; k < res.active_constraints.size(); ++k) {
      const auto& a = cons[res.active_constraints[k]].a;
      for (std::size_t i = 0; i < n; ++i) stationarity[i] -= res.multipliers[k] * a[i];
      CHECK(res.multipliers[k] >= 0.0);
      CHECK(std::fabs(cons[res.active_constraints[k]].slack(res.u_star) *
                      res.multipliers[k]) < 1e-6);
    }
    CHECK(norm(stationarity) < 1e-6);

    if (res.modified) {
      ++checked;
      const Vec oracle = kkt_oracle(u_d, cons);
      REQUIRE(oracle.size() == n);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(std::fabs(res.u_star[i] - oracle[i]) < 1e-6);
    } else {
      for (std::size_t i = 0; i < n; ++i) CHECK(res.u_star[i] == u_d[i]);
    }
  }
  CHECK(checked > 100);  // a healthy share of instances actually clip
}

TEST_CASE("solution norm never exceeds a brute projection onto one constraint") {
  // Minimal invasiveness: ||u* - u_d|| <= distance to any single violated
  // half-space's feasible side... is false in general; the correct direction
  // is >=. Check that dropping constraints can only shrink the correction.
  const Vec u_d = {1.0, 1.0};
  std::vector<SafetyConstraint> both = {{{-1.0, 0.0}, 0.2}, {{0.0, -1.0}, 0.2}};
  const auto full = solve_filter_qp(u_d, both);
  const auto only_first = solve_filter_qp(u_d, {both[0]});
  auto dev = [&](const Vec& u) {
    return std::hypot(u[0] - u_d[0], u[1] - u_d[1]);
  };
  CHECK(dev(full.u_star) >= dev(only_first.u_star) - 1e-12);
  CHECK(full.u_star[0] == Catch::Approx(0.2));
  CHECK(full.u_star[1] == Catch::Approx(0.2));
}

TEST_CASE("duplicate constraints do not break the active set") {
  const Vec u_d = {1.0, 0.0};
  std::vector<SafetyConstraint> cons = {{{-1.0, 0.0}, 0.5}, {{-1.0, 0.0}, 0.5},
                                        {{-1.0, 0.0}, 0.5}};
  const auto res = solve_filter_qp(u_d, cons);
  CHECK(res.u_star[0] == Catch::Approx(0.5));
  CHECK(res.u_star[1] == Catch::Approx(0.0).margin(1e-12));
}
