#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "sbcbf/dynamics.hpp"

using namespace sbcbf;

TEST_CASE("wheel matrix entries for l=0.2, r=0.02") {
  const OmniRobotModel omni;
  const Mat b = omni.wheel_matrix();
  CHECK(b(0, 0) == 0.0);
  CHECK(b(0, 1) == Catch::Approx(0.0173205080757).epsilon(1e-10));
  CHECK(b(0, 2) == Catch::Approx(-0.0173205080757).epsilon(1e-10));
  CHECK(b(1, 0) == Catch::Approx(-0.02));
  CHECK(b(1, 1) == Catch::Approx(0.01));
  CHECK(b(1, 2) == Catch::Approx(0.01));
  for (int j = 0; j < 3; ++j) CHECK(b(2, j) == Catch::Approx(0.004));
}

TEST_CASE("rotation block is an isometry to 1e-12") {
  for (double heading : {0.0, 0.3, 1.7, -2.4, 3.14159}) {
    const Mat g = OmniRobotModel::rotation_block(heading);
    const Mat gtg = matmul(transpose(g), g);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        CHECK(std::fabs(gtg(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);
  }
}

TEST_CASE("omni g(x) has constant conditioning over heading") {
  const auto model = omni_model();
  const double c0 = model.rank_condition({0.0, 0.0, 0.0});
  for (double heading : {0.5, 1.0, 2.0, -1.3}) {
    const double c = model.rank_condition({3.0, -1.0, heading});
    CHECK(c == Catch::Approx(c0).epsilon(1e-6));
  }
  CHECK(c0 < 1e6);
}

TEST_CASE("omni robot is exactly stationary with zero input") {
  const auto model = omni_model();
  Vec x = {1.0, 2.0, 0.7};
  const Vec u(3, 0.0);
  const Vec d(3, 0.0);
  for (int k = 0; k < 100; ++k) x = step_rk4(model, x, u, d, 0.01);
  CHECK(x[0] == 1.0);
  CHECK(x[1] == 2.0);
  CHECK(x[2] == 0.7);
}

TEST_CASE("RK4 shows fourth-order convergence on the omni model") {
  // Constant wheel speeds turn the robot, so g(x(t)) varies along the
  // trajectory and the integrator error is exercised.
  const auto model = omni_model();
  const Vec x0 = {0.0, 0.0, 0.0};
  const Vec u = {0.1, 0.05, -0.08};
  const Vec d(3, 0.0);

  auto integrate = [&](double dt, double t_end) {
    Vec x = x0;
    const int steps = static_cast<int>(std::llround(t_end / dt));
    for (int k = 0; k < steps; ++k) x = step_rk4(model, x, u, d, dt);
    return x;
  };
  const Vec ref = integrate(1.0 / 4096.0, 1.0);
  auto err = [&](double dt) {
    const Vec x = integrate(dt, 1.0);
    return std::sqrt((x[0] - ref[0]) * (x[0] - ref[0]) + (x[1] - ref[1]) * (x[1] - ref[1]) +
                     (x[2] - ref[2]) * (x[2] - ref[2]));
  };
  const double e1 = err(1.0 / 16.0);
  const double e2 = err(1.0 / 32.0);
  const double ratio = e1 / e2;
  CHECK(ratio > 8.0);
  CHECK(ratio < 32.0);
}

TEST_CASE("integrator model moves linearly under constant input") {
  const auto model = integrator_model(2);
  Vec x = {0.0, 0.0};
  const Vec u = {1.0, -0.5};
  for (int k = 0; k < 100; ++k) x = step_rk4(model, x, u, {0.0, 0.0}, 0.01);
  CHECK(x[0] == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(x[1] == Catch::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("disturbance draws respect the box and the norm bound") {
  DisturbanceModel dm;
  dm.kind = DisturbanceModel::Kind::UniformBox;
  dm.half_width = {0.4, 0.4, 0.4};
  dm.seed = 3;
  CHECK(dm.norm_bound() == Catch::Approx(0.4 * std::sqrt(3.0)));
  double max_norm = 0.0;
  Vec mean(3, 0.0);
  const int trials = 20000;
  for (int k = 0; k < trials; ++k) {
    const Vec d = sample_disturbance(dm, 3, static_cast<std::size_t>(k));
    for (int i = 0; i < 3; ++i) {
      CHECK(std::fabs(d[i]) <= 0.4);
      mean[i] += d[i];
    }
    max_norm = std::max(max_norm, norm(d));
  }
  CHECK(max_norm <= dm.norm_bound());
  CHECK(max_norm > 0.9 * dm.norm_bound());  // corners are approached
  for (int i = 0; i < 3; ++i) CHECK(std::fabs(mean[i] / trials) < 0.01);
}

TEST_CASE("disturbance draws are reproducible and order-independent") {
  DisturbanceModel dm;
  dm.kind = DisturbanceModel::Kind::UniformBox;
  dm.half_width = {0.1, 0.2};
  dm.seed = 77;
  const Vec late = sample_disturbance(dm, 2, 500);
  const Vec early = sample_disturbance(dm, 2, 3);
  const Vec late_again = sample_disturbance(dm, 2, 500);
  CHECK(late[0] == late_again[0]);
  CHECK(late[1] == late_again[1]);
  CHECK((late[0] != early[0] || late[1] != early[1]));
}

TEST_CASE("none disturbance is exactly zero") {
  const DisturbanceModel dm;
  const Vec d = sample_disturbance(dm, 3, 9);
  for (double v : d) CHECK(v == 0.0);
}

TEST_CASE("non-finite states are rejected") {
  ControlAffineModel bad;
  bad.n_x = bad.n_u = 1;
  bad.f = [](const Vec& x) { return Vec{x[0] * x[0]}; };  // finite-time blowup
  bad.g = [](const Vec&) { return Mat::identity(1); };
  Vec x = {1e200};
  CHECK_THROWS_AS(step_rk4(bad, x, {0.0}, {0.0}, 1.0), NonFiniteState);
}
