#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tanktune/fopdt.hpp"
#include "tanktune/rewards_metrics.hpp"

using namespace tanktune;

TEST_CASE("cost is zero at rest for every reward kind") {
  for (const char* name : {"eq17", "eq12", "eqB1", "eqB2"}) {
    const RewardSpec spec = reward_spec_from_name(name);
    CHECK(cost(spec, 0.0, 0.0) == 0.0);
  }
  RewardSpec power{RewardKind::PowerPenalty, 0.3, 2, 1};
  CHECK(cost(power, 0.0, 0.0) == 0.0);
}

TEST_CASE("hybrid cost meets both branches at |e| = 1") {
  const RewardSpec spec = reward_spec_from_name("eq12");
  CHECK(cost(spec, 1.0, 0.0) == doctest::Approx(1.0));
  CHECK(cost(spec, std::nextafter(1.0, 2.0), 0.0) == doctest::Approx(1.0));
  CHECK(cost(spec, 2.0, 0.0) == doctest::Approx(2.5));
  CHECK(cost(spec, -2.0, 0.0) == doctest::Approx(2.5));
}

TEST_CASE("hybrid cost is continuous with matching slopes at the switch") {
  const RewardSpec spec = reward_spec_from_name("eq12");
  const double h = 1e-7;
  for (double at : {1.0, -1.0}) {
    const double left = (cost(spec, at, 0.0) - cost(spec, at - h, 0.0)) / h;
    const double right = (cost(spec, at + h, 0.0) - cost(spec, at, 0.0)) / h;
    CHECK(left == doctest::Approx(right).epsilon(1e-5));
    CHECK(std::abs(left) == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("the absolute-error reward with input penalty") {
  const RewardSpec spec = reward_spec_from_name("eq17");
  CHECK(spec.lambda == doctest::Approx(0.1));
  CHECK(cost(spec, 2.0, 1.0) == doctest::Approx(2.1));
}

TEST_CASE("power-penalty family covers the absolute and squared forms") {
  RewardSpec spec{RewardKind::PowerPenalty, 0.5, 1, 2};
  CHECK(cost(spec, -3.0, 2.0) == doctest::Approx(3.0 + 0.5 * 4.0));
  spec.p = 2;
  spec.q = 1;
  CHECK(cost(spec, -3.0, -2.0) == doctest::Approx(9.0 + 0.5 * 2.0));
}

TEST_CASE("cost is non-negative and vanishes only at rest") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-4.0, 4.0);
  for (const char* name : {"eq17", "eq12", "eqB1", "eqB2"}) {
    const RewardSpec spec = reward_spec_from_name(name);
    for (int i = 0; i < 500; ++i) {
      const double e = dist(rng), du = dist(rng);
      const double c = cost(spec, e, du);
      CHECK(c >= 0.0);
      if (e != 0.0) CHECK(c > 0.0);
    }
  }
}

TEST_CASE("lambda heuristic is the reciprocal of the largest input move") {
  CHECK(suggest_lambda(20.0) == doctest::Approx(0.05));
  CHECK_THROWS_AS(suggest_lambda(0.0), std::invalid_argument);
}

namespace {

std::vector<double> iota_times(std::size_t n, double dt) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = i * dt;
  return t;
}

}  // namespace

TEST_CASE("monotone step response has zero overshoot and telescoping TV") {
  const std::size_t n = 101;
  const auto times = iota_times(n, 1.0);
  std::vector<double> y(n), u(n, 40.0);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = 65.0 - 5.0 * std::exp(-static_cast<double>(i) / 20.0);
  u[1] = 42.0;  // one input move so tv_u is defined
  const StepMetrics m = step_metrics(times, y, u, 60.0, 65.0);
  CHECK(m.percent_os == 0.0);
  CHECK(m.os_raw == 0.0);
  CHECK(m.tv_raw == doctest::Approx(y.back() - y.front()).epsilon(1e-12));
}

TEST_CASE("geometric error decay pins the settling time") {
  // e(t) = 5 * 0.5^t, eps = 0.1: first instant with |e| <= 0.1 forever is t=6.
  const std::size_t n = 30;
  const auto times = iota_times(n, 1.0);
  std::vector<double> y(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = 65.0 - 5.0 * std::pow(0.5, static_cast<double>(i));
    u[i] = 40.0 + (i > 0 ? 1.0 : 0.0);
  }
  const StepMetrics m = step_metrics(times, y, u, 60.0, 65.0, 0.1);
  CHECK(m.settled);
  CHECK(m.settling_time == doctest::Approx(6.0));

  // Independent direct-summation oracle for the discrete IAE.
  double iae = 0.0;
  for (std::size_t i = 0; i < n; ++i) iae += 5.0 * std::pow(0.5, static_cast<double>(i));
  CHECK(m.iae_raw == doctest::Approx(iae).epsilon(1e-12));
  CHECK(m.iae_raw < 10.0);
  CHECK(m.iae_raw > 10.0 * (1.0 - std::pow(0.5, static_cast<double>(n))) - 1e-9);
}

TEST_CASE("overshoot of two units over a five unit step is forty percent") {
  const std::size_t n = 50;
  const auto times = iota_times(n, 1.0);
  std::vector<double> y(n, 65.0), u(n, 40.0);
  y[0] = 60.0;
  y[10] = 67.0;  // peak two units above the new setpoint
  u[1] = 41.0;
  const StepMetrics m = step_metrics(times, y, u, 60.0, 65.0);
  CHECK(m.os_raw == doctest::Approx(2.0));
  CHECK(m.percent_os == doctest::Approx(40.0));
}

TEST_CASE("metrics match a brute-force oracle on random signals") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 100;
    const double dt = 0.5;
    const auto times = iota_times(n, dt);
    std::vector<double> y(n), u(n);
    const double sp0 = 60.0, sp1 = 63.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = sp1 + dist(rng);
      u[i] = 40.0 + dist(rng);
    }
    const StepMetrics m = step_metrics(times, y, u, sp0, sp1);

    double iae = 0.0, ise = 0.0, tv = 0.0, tvu = 0.0, os = 0.0;
    const double e0 = sp1 - y[0];
    for (std::size_t i = 0; i < n; ++i) {
      const double e = sp1 - y[i];
      iae += std::abs(e) * dt;
      ise += e * e * dt;
      if (e0 * e < 0.0 && std::abs(e) > os) os = std::abs(e);
      if (i + 1 < n) {
        tv += std::abs(y[i + 1] - y[i]);
        tvu += std::abs(u[i + 1] - u[i]);
      }
    }
    const double scale = std::abs(sp1 - sp0);
    CHECK(m.iae_raw == doctest::Approx(iae).epsilon(1e-12));
    CHECK(m.ise_raw == doctest::Approx(ise).epsilon(1e-12));
    CHECK(m.tv_raw == doctest::Approx(tv).epsilon(1e-12));
    CHECK(m.tv_u_raw == doctest::Approx(tvu).epsilon(1e-12));
    CHECK(m.iae == doctest::Approx(iae / scale).epsilon(1e-12));
    CHECK(m.ise == doctest::Approx(ise / (scale * scale)).epsilon(1e-12));
    CHECK(m.tv == doctest::Approx(tv / scale).epsilon(1e-12));
    CHECK(m.percent_os == doctest::Approx(100.0 * os / scale).epsilon(1e-12));
    const double du0 = u[1] - u[0];
    if (du0 != 0.0) CHECK(m.tv_u == doctest::Approx(tvu / std::abs(du0)).epsilon(1e-12));
  }
}

TEST_CASE("total variation is additive over chained segments") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> a(40), b(40);
  for (auto& v : a) v = 63.0 + dist(rng);
  for (auto& v : b) v = 63.0 + dist(rng);
  b[0] = a.back();  // endpoints chain

  std::vector<double> joined = a;
  joined.insert(joined.end(), b.begin() + 1, b.end());
  std::vector<double> u_a(a.size(), 1.0), u_b(b.size(), 1.0), u_j(joined.size(), 1.0);
  u_a[1] = u_b[1] = u_j[1] = 2.0;

  const double tv_a =
      step_metrics(iota_times(a.size(), 1.0), a, u_a, 60.0, 63.0).tv_raw;
  const double tv_b =
      step_metrics(iota_times(b.size(), 1.0), b, u_b, 60.0, 63.0).tv_raw;
  const double tv_j =
      step_metrics(iota_times(joined.size(), 1.0), joined, u_j, 60.0, 63.0).tv_raw;
  CHECK(tv_j == doctest::Approx(tv_a + tv_b).epsilon(1e-12));
}

TEST_CASE("settling time never grows with a larger band") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 120;
    const auto times = iota_times(n, 1.0);
    std::vector<double> y(n), u(n, 1.0);
    u[1] = 2.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double decay = 5.0 * std::exp(-static_cast<double>(i) / 15.0);
      y[i] = 65.0 - decay * (0.5 + dist(rng));
    }
    double prev_st = 1e18;
    for (double eps : {0.05, 0.1, 0.5, 1.0, 2.0}) {
      const StepMetrics m = step_metrics(times, y, u, 60.0, 65.0, eps);
      const double st = m.settled ? m.settling_time : 1e17;
      CHECK(st <= prev_st + 1e-12);
      prev_st = st;
    }
  }
}

TEST_CASE("degenerate metric inputs are rejected") {
  const auto times = iota_times(10, 1.0);
  std::vector<double> y(10, 1.0), u(10, 1.0);
  CHECK_THROWS_AS(step_metrics(times, y, u, 60.0, 60.0), std::invalid_argument);
  std::vector<double> small(3, 1.0);
  CHECK_THROWS_AS(step_metrics(small, y, u, 60.0, 65.0), std::invalid_argument);
}

TEST_CASE("undefined initial input move is flagged") {
  const auto times = iota_times(20, 1.0);
  std::vector<double> y(20, 64.0), u(20, 40.0);
  y[0] = 60.0;
  const StepMetrics m = step_metrics(times, y, u, 60.0, 65.0);
  CHECK_FALSE(m.tv_u_defined);
}

TEST_CASE("zero controller has unit maximum sensitivity") {
  const SensitivityResult r =
      max_sensitivity(PidGains{0.0, 0.0, 0.0, 0.0}, reference_model());
  CHECK(r.ms == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("a vanishing proportional controller approaches unit sensitivity") {
  const SensitivityResult r =
      max_sensitivity(PidGains{1e-6, 0.0, 0.0, 0.0}, reference_model());
  CHECK(r.ms == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("maximum sensitivity of the SIMC tc=20 tuning is stable across grids") {
  const PidGains gains = simc_pi(reference_model(), 20.0);
  const SensitivityResult coarse = max_sensitivity(gains, reference_model());
  OmegaGrid dense;
  dense.n = 20000;
  const SensitivityResult fine = max_sensitivity(gains, reference_model(), 0.1, dense);
  CHECK(coarse.ms == doctest::Approx(fine.ms).epsilon(1e-4));
  // Frozen regression value from the dense sweep.
  CHECK(fine.ms == doctest::Approx(1.3493).epsilon(2e-3));
  CHECK(coarse.grid_ok);
}

TEST_CASE("sensitivity rejects unstable models and bad grids") {
  FopdtModel bad{3.44, 0.0, 9.21};
  CHECK_THROWS_AS(max_sensitivity(PidGains{1, 0, 0, 0}, bad), std::invalid_argument);
  OmegaGrid grid;
  grid.lo = -1.0;
  CHECK_THROWS_AS(max_sensitivity(PidGains{1, 0, 0, 0}, reference_model(), 0.1, grid),
                  std::invalid_argument);
}
