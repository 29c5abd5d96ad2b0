#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tanktune/pid.hpp"

using namespace tanktune;

TEST_CASE("filtered second difference: constant output decays to zero") {
  PidState st = make_pid_state(0.3, 1.0, 0.0);
  filtered_second_difference(st, 4.0);  // priming sample
  for (int i = 0; i < 5; ++i) {
    const FilteredDiff d = filtered_second_difference(st, 4.0);
    CHECK(d.dy_f == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(d.neg_d2y == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("filtered second difference: unfiltered ramp recovers the slope") {
  PidState st = make_pid_state(0.0, 1.0, 0.0);
  const double c = 1.7;
  filtered_second_difference(st, 0.0);
  FilteredDiff d = filtered_second_difference(st, c);
  CHECK(d.dy_f == doctest::Approx(c).epsilon(1e-14));
  for (int k = 2; k < 6; ++k) {
    d = filtered_second_difference(st, k * c);
    CHECK(d.dy_f == doctest::Approx(c).epsilon(1e-14));
    CHECK(d.neg_d2y == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("filtered second difference: hand-iterated recursion") {
  // t_f = 0.5, y = [0, 1, 1], dt = 1: dy_f = [0, 0.5, 0.25], d2y_2 = -0.25.
  PidState st = make_pid_state(0.5, 1.0, 0.0);
  FilteredDiff d0 = filtered_second_difference(st, 0.0);
  CHECK(d0.dy_f == 0.0);
  FilteredDiff d1 = filtered_second_difference(st, 1.0);
  CHECK(d1.dy_f == doctest::Approx(0.5));
  FilteredDiff d2 = filtered_second_difference(st, 1.0);
  CHECK(d2.dy_f == doctest::Approx(0.25));
  CHECK(d2.neg_d2y == doctest::Approx(0.25));  // second difference is -0.25
}

TEST_CASE("observation at the setpoint with steady history is all zeros") {
  PidState st = make_pid_state(0.1, 1.0, 50.0);
  const Observation first = compute_observation(st, 60.0, 60.0);
  CHECK(first.d_e == 0.0);
  CHECK(first.i_e == 0.0);
  CHECK(first.neg_d2y == 0.0);
  CHECK(first.aw == 0.0);
  CHECK(first.u_prev == 50.0);
  const Observation again = compute_observation(st, 60.0, 60.0);
  CHECK(again.d_e == 0.0);
  CHECK(again.i_e == 0.0);
  CHECK(again.neg_d2y == 0.0);
  CHECK(again.aw == 0.0);
  CHECK(again.u_prev == 50.0);
}

TEST_CASE("no saturation on the previous step gives zero anti-windup term") {
  PidState st = make_pid_state(0.1, 1.0, 10.0);
  compute_observation(st, 60.0, 60.0);
  st.u_prev = 12.0;
  st.u_hat_prev = 12.0;  // u_hat == u
  const Observation obs = compute_observation(st, 60.0, 59.0);
  CHECK(obs.aw == 0.0);
}

TEST_CASE("setpoint step from equilibrium") {
  const double dt = 0.5;
  PidState st = make_pid_state(0.1, dt, 10.0);
  compute_observation(st, 60.0, 60.0);  // settled
  const Observation obs = compute_observation(st, 65.0, 60.0);
  CHECK(obs.d_e == doctest::Approx(5.0));
  CHECK(obs.i_e == doctest::Approx(5.0 * dt));
}

TEST_CASE("proportional-only incremental step") {
  PidState st = make_pid_state(0.1, 1.0, 10.0);
  Observation obs;
  obs.d_e = 2.0;
  obs.u_prev = 10.0;
  const PidOutput out = pid_step(PidGains{1.0, 0.0, 0.0, 0.0}, st, obs, -1e9, 1e9);
  CHECK(out.u_hat == doctest::Approx(12.0));
  CHECK(out.u == doctest::Approx(12.0));
}

TEST_CASE("saturation feeds the anti-windup discrepancy into the next step") {
  const double dt = 1.0;
  PidState st = make_pid_state(0.1, dt, 10.0);
  compute_observation(st, 60.0, 60.0);
  Observation obs = compute_observation(st, 70.0, 60.0);  // big step
  const PidOutput out = pid_step(PidGains{5.0, 0.0, 0.0, 0.5}, st, obs, 0.0, 20.0);
  CHECK(out.u_hat > 20.0);
  CHECK(out.u == 20.0);
  const Observation next = compute_observation(st, 70.0, 60.0);
  CHECK(next.aw == doctest::Approx(dt * (out.u_hat - 20.0)));
  CHECK(next.aw > 0.0);
}

TEST_CASE("zero observation leaves the output at u_prev exactly") {
  PidState st = make_pid_state(0.1, 1.0, 37.25);
  Observation obs;
  obs.u_prev = 37.25;
  const PidOutput out =
      pid_step(PidGains{3.1, 0.2, 1.4, 0.7}, st, obs, 0.0, 100.0);
  CHECK(out.u == 37.25);
  CHECK(out.u_hat == 37.25);
}

TEST_CASE("output respects the saturation interval") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  PidState st = make_pid_state(0.1, 1.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    Observation obs;
    obs.d_e = dist(rng);
    obs.i_e = dist(rng);
    obs.neg_d2y = dist(rng);
    obs.aw = dist(rng);
    obs.u_prev = st.u_prev;
    const PidOutput out =
        pid_step(PidGains{4.0, 1.0, 2.0, 0.5}, st, obs, 2.0, 8.0);
    CHECK(out.u >= 2.0);
    CHECK(out.u <= 8.0);
    CHECK(std::isfinite(out.u_hat));
  }
}

TEST_CASE("the raw proposal is affine in the gains with observation coefficients") {
  Observation obs;
  obs.d_e = 1.3;
  obs.i_e = -0.4;
  obs.neg_d2y = 0.9;
  obs.aw = -2.2;
  obs.u_prev = 11.0;
  const double coeffs[4] = {obs.d_e, obs.i_e, obs.neg_d2y, obs.aw};
  for (int basis = 0; basis < 4; ++basis) {
    PidGains gains;
    if (basis == 0) gains.kp = 1.0;
    if (basis == 1) gains.ki = 1.0;
    if (basis == 2) gains.kd = 1.0;
    if (basis == 3) gains.ktau = 1.0;
    PidState st = make_pid_state(0.1, 1.0, obs.u_prev);
    const PidOutput out = pid_step(gains, st, obs, -1e9, 1e9);
    CHECK(out.u_hat - obs.u_prev == doctest::Approx(coeffs[basis]).epsilon(1e-14));
  }
}

TEST_CASE("incremental controller matches the positional form without saturation") {
  // ktau = 0, wide limits: the accumulated increments telescope to
  //   u_T = u0 + kp (e_T - e_0) + ki dt sum(e) - kd dy_f_T / dt.
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  const double dt = 0.5, t_f = 0.3, sp = 50.0;
  const PidGains gains{2.5, 0.8, 1.2, 0.0};

  PidState st = make_pid_state(t_f, dt, 20.0);
  std::vector<double> ys;
  double u = 20.0;
  double e0 = 0.0;

  // Independent positional bookkeeping.
  double sum_e = 0.0, dy_f = 0.0, y_prev = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double y = 48.0 + dist(rng);
    const Observation obs = compute_observation(st, sp, y);
    u = pid_step(gains, st, obs, -1e9, 1e9).u;

    const double e = sp - y;
    if (t == 0) {
      e0 = e;
      y_prev = y;
    } else {
      dy_f = t_f * dy_f + (1.0 - t_f) * (y - y_prev) / dt;
      y_prev = y;
    }
    sum_e += e;
    const double positional =
        20.0 + gains.kp * (e - e0) + gains.ki * dt * sum_e - gains.kd * dy_f / dt;
    CHECK(u == doctest::Approx(positional).epsilon(1e-12));
  }
}

TEST_CASE("state construction validates its arguments") {
  CHECK_THROWS_AS(make_pid_state(-0.1, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_pid_state(1.1, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_pid_state(0.1, 0.0, 0.0), std::invalid_argument);
  PidState st = make_pid_state(0.1, 1.0, 0.0);
  Observation obs;
  CHECK_THROWS_AS(pid_step(PidGains{}, st, obs, 1.0, 1.0), std::invalid_argument);
}
