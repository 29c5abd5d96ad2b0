#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tanktune/calibrate.hpp"
#include "tanktune/fopdt.hpp"

using namespace tanktune;

namespace {

struct StepData {
  std::vector<double> times, u, y;
};

StepData synthetic_step(const FopdtModel& model, double u0, double du, double y0,
                        double pre, double horizon, double dt) {
  StepData data;
  const int n = static_cast<int>((pre + horizon) / dt);
  for (int i = 0; i < n; ++i) data.times.push_back(i * dt);
  for (int i = 0; i < n; ++i) data.u.push_back(data.times[i] < pre ? u0 : u0 + du);
  data.y = fopdt_step_response(model, du, y0, data.times, pre);
  return data;
}

}  // namespace

TEST_CASE("two-point fit recovers the reference model from exact data") {
  const FopdtModel truth = reference_model();
  const StepData data = synthetic_step(truth, 35.0, 2.0, 60.0, 60.0, 2400.0, 1.0);
  const FopdtModel fit = fit_fopdt(data.times, data.u, data.y);
  CHECK(fit.k == doctest::Approx(truth.k).epsilon(0.02));
  CHECK(fit.tau1 == doctest::Approx(truth.tau1).epsilon(0.02));
  CHECK(fit.theta_d == doctest::Approx(truth.theta_d).epsilon(0.02));
}

TEST_CASE("pure first-order data fits with negligible dead time") {
  const FopdtModel truth{2.0, 120.0, 0.0};
  const StepData data = synthetic_step(truth, 10.0, 1.5, 20.0, 30.0, 900.0, 1.0);
  const FopdtModel fit = fit_fopdt(data.times, data.u, data.y);
  CHECK(fit.theta_d <= 2.0);  // two samples at 1 s
}

TEST_CASE("fit is invariant to the step size on linear data") {
  const FopdtModel truth{3.0, 200.0, 10.0};
  const StepData a = synthetic_step(truth, 30.0, 1.0, 50.0, 60.0, 1600.0, 1.0);
  const StepData b = synthetic_step(truth, 30.0, 2.0, 50.0, 60.0, 1600.0, 1.0);
  const FopdtModel fit_a = fit_fopdt(a.times, a.u, a.y);
  const FopdtModel fit_b = fit_fopdt(b.times, b.u, b.y);
  CHECK(fit_a.k == doctest::Approx(fit_b.k).epsilon(1e-6));
  CHECK(fit_a.tau1 == doctest::Approx(fit_b.tau1).epsilon(1e-6));
  CHECK(fit_a.theta_d == doctest::Approx(fit_b.theta_d).epsilon(1e-4));
}

TEST_CASE("an unsettled response is rejected") {
  const FopdtModel truth{3.44, 301.19, 9.21};
  // Horizon far below 5 tau: the tail is still moving.
  const StepData data = synthetic_step(truth, 35.0, 2.0, 60.0, 60.0, 400.0, 1.0);
  CHECK_THROWS_WITH_AS(fit_fopdt(data.times, data.u, data.y), "response not settled",
                       std::runtime_error);
}

TEST_CASE("a stepless input is rejected") {
  std::vector<double> t(100), u(100, 5.0), y(100, 1.0);
  for (int i = 0; i < 100; ++i) t[i] = i;
  CHECK_THROWS_AS(fit_fopdt(t, u, y), std::invalid_argument);
}

TEST_CASE("fit then generate is a two-percent-accurate identity on the box") {
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> uk(1.0, 10.0), utau(50.0, 500.0),
      utheta(0.0, 30.0);
  for (int trial = 0; trial < 20; ++trial) {
    const FopdtModel truth{uk(rng), utau(rng), utheta(rng)};
    const double horizon = 6.0 * truth.tau1 + truth.theta_d;
    const StepData data = synthetic_step(truth, 20.0, 1.0, 40.0, 50.0, horizon, 1.0);
    const FopdtModel fit = fit_fopdt(data.times, data.u, data.y);
    CHECK(fit.k == doctest::Approx(truth.k).epsilon(0.02));
    CHECK(fit.tau1 == doctest::Approx(truth.tau1).epsilon(0.02));
    CHECK(std::abs(fit.theta_d - truth.theta_d) <=
          std::max(0.02 * truth.theta_d, 0.1));
  }
}

TEST_CASE("SIMC fixture at tc = 20 on the reference model") {
  const PidGains gains = simc_pi(reference_model(), 20.0);
  CHECK(gains.kp == doctest::Approx(2.998).epsilon(0.001 / 2.998));
  CHECK(gains.ki == doctest::Approx(0.02566).epsilon(0.0001 / 0.02566));
  CHECK(gains.kd == 0.0);
  CHECK(gains.ktau == doctest::Approx(0.5));
}

TEST_CASE("the integral time saturates at tau1 for small tc") {
  // tc = theta_d keeps 4(tc+theta_d) = 73.68 below tau1 = 301.19.
  const PidGains gains = simc_pi(reference_model(), 9.21);
  const double ti = gains.kp / gains.ki;
  CHECK(ti == doctest::Approx(4.0 * (9.21 + 9.21)).epsilon(1e-9));
  // A very large tc switches the minimum to tau1.
  const PidGains slow = simc_pi(reference_model(), 200.0);
  CHECK(slow.kp / slow.ki == doctest::Approx(reference_model().tau1).epsilon(1e-9));
}

TEST_CASE("the full tc grid evaluates and kp decreases monotonically") {
  double prev = 1e18;
  for (double tc : reference_tc_grid()) {
    const PidGains gains = simc_pi(reference_model(), tc);
    CHECK(gains.kp < prev);
    CHECK(gains.kp > 0.0);
    CHECK(gains.ki > 0.0);
    prev = gains.kp;
  }
}

TEST_CASE("simc rejects invalid arguments") {
  CHECK_THROWS_AS(simc_pi(reference_model(), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(simc_pi(FopdtModel{0.0, 100.0, 5.0}, 10.0), std::invalid_argument);
}

TEST_CASE("shipped plant parameters calibrate to the reference model") {
  const PlantParams params;
  const CalibrationResult calib = calibrate_to_fopdt(params, 2.0);
  CHECK(calib.model.k == doctest::Approx(3.44).epsilon(0.15));
  CHECK(calib.model.tau1 == doctest::Approx(301.19).epsilon(0.15));
  CHECK(calib.model.theta_d == doctest::Approx(9.21).epsilon(0.30));
}

TEST_CASE("with no delay sources the fitted dead time is negligible") {
  PlantParams params;
  params.transport_delay = 0.0;
  params.tau_p = params.tau_in = params.tau_out = params.tau_m = 0.0;
  const CalibrationResult calib = calibrate_to_fopdt(params, 2.0);
  CHECK(calib.model.theta_d <= 2.0);  // two samples of the 1 s calibration data
}

TEST_CASE("doubling the pump capacity leaves the fitted gain unchanged") {
  // The inner flow loop has integral action, so the flow-setpoint -> level
  // DC gain does not depend on f_max.
  PlantParams params;
  const FopdtModel base = calibrate_to_fopdt(params, 2.0).model;
  params.f_max *= 2.0;
  const FopdtModel doubled = calibrate_to_fopdt(params, 2.0).model;
  CHECK(doubled.k == doctest::Approx(base.k).epsilon(0.02));
}
