#include "tanktune/rewards_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tanktune {

RewardSpec reward_spec_from_name(const std::string& name) {
  RewardSpec spec;
  if (name == "eq17") {
    spec.kind = RewardKind::AbsPenalty;
    spec.lambda = 0.1;
  } else if (name == "eq12") {
    spec.kind = RewardKind::Hybrid;
    spec.lambda = 0.0;
  } else if (name == "eqB1") {
    spec.kind = RewardKind::SquarePenalty;
    spec.lambda = 0.1;
  } else if (name == "eqB2") {
    spec.kind = RewardKind::HybridPenalty;
    spec.lambda = 0.1;
  } else {
    throw std::invalid_argument("unknown reward name: " + name);
  }
  return spec;
}

std::string reward_name(const RewardSpec& spec) {
  switch (spec.kind) {
    case RewardKind::AbsPenalty: return "eq17";
    case RewardKind::Hybrid: return "eq12";
    case RewardKind::SquarePenalty: return "eqB1";
    case RewardKind::HybridPenalty: return "eqB2";
    case RewardKind::PowerPenalty: return "power";
  }
  return "unknown";
}

namespace {

double hybrid_cost(double e) {
  const double a = std::abs(e);
  return a < 1.0 ? a : 0.5 * (e * e + 1.0);
}

double int_pow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace

double cost(const RewardSpec& spec, double e, double du) {
  if (!(std::isfinite(e) && std::isfinite(du)))
    throw std::invalid_argument("cost: non-finite inputs");
  switch (spec.kind) {
    case RewardKind::PowerPenalty:
      return int_pow(std::abs(e), spec.p) + spec.lambda * int_pow(std::abs(du), spec.q);
    case RewardKind::Hybrid:
      return hybrid_cost(e);
    case RewardKind::HybridPenalty:
      return hybrid_cost(e) + spec.lambda * du * du;
    case RewardKind::AbsPenalty:
      return std::abs(e) + spec.lambda * du * du;
    case RewardKind::SquarePenalty:
      return e * e + spec.lambda * du * du;
  }
  throw std::logic_error("cost: unhandled reward kind");
}

double suggest_lambda(double du_max) {
  if (du_max <= 0.0) throw std::invalid_argument("suggest_lambda: du_max must be > 0");
  return 1.0 / du_max;
}

StepMetrics step_metrics(const std::vector<double>& times,
                         const std::vector<double>& y, const std::vector<double>& u,
                         double setpoint_before, double setpoint_after,
                         double epsilon, bool tv_on_error) {
  const std::size_t n = times.size();
  if (n < 2 || y.size() != n || u.size() != n)
    throw std::invalid_argument("step_metrics: need matched arrays with >= 2 samples");
  const double dsp = setpoint_after - setpoint_before;
  if (dsp == 0.0)
    throw std::invalid_argument("step_metrics: setpoint change must be nonzero");
  const double dt = times[1] - times[0];

  StepMetrics m;
  m.epsilon = epsilon > 0.0 ? epsilon : 0.02 * std::abs(dsp);

  const double e0 = setpoint_after - y[0];
  double os = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = setpoint_after - y[i];
    m.iae_raw += std::abs(e) * dt;
    m.ise_raw += e * e * dt;
    if (e0 * e < 0.0) os = std::max(os, std::abs(e));
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    m.tv_raw += std::abs(y[i + 1] - y[i]);
    m.tv_u_raw += std::abs(u[i + 1] - u[i]);
  }
  m.os_raw = os;

  const double scale = std::abs(dsp);
  m.iae = m.iae_raw / scale;
  m.ise = m.ise_raw / (scale * scale);
  m.tv = tv_on_error ? m.tv_raw / scale : m.tv_raw;
  m.percent_os = 100.0 * os / scale;

  const double du0 = u.size() > 1 ? u[1] - u[0] : 0.0;
  m.tv_u_defined = du0 != 0.0;
  m.tv_u = m.tv_u_defined ? m.tv_u_raw / std::abs(du0) : 0.0;

  // First time after which |e| stays within the band.
  std::size_t first_outside_from_end = n;  // index after the last violation
  for (std::size_t i = n; i-- > 0;) {
    if (std::abs(setpoint_after - y[i]) > m.epsilon) {
      first_outside_from_end = i + 1;
      break;
    }
    first_outside_from_end = i;
  }
  if (first_outside_from_end >= n) {
    m.settled = false;
    m.settling_time = times.back() - times.front();
  } else {
    m.settled = true;
    m.settling_time = times[first_outside_from_end] - times.front();
  }
  return m;
}

SensitivityResult max_sensitivity(const PidGains& gains, const FopdtModel& model,
                                  double tf, OmegaGrid grid) {
  if (model.tau1 <= 0.0)
    throw std::invalid_argument("max_sensitivity: model must be stable (tau1 > 0)");
  if (grid.n < 2 || grid.lo <= 0.0 || grid.hi <= grid.lo)
    throw std::invalid_argument("max_sensitivity: bad frequency grid");

  using cd = std::complex<double>;
  auto sweep = [&](std::size_t n, SensitivityResult& res) {
    res.ms = 0.0;
    double prev = -1.0;
    res.grid_ok = true;
    const double log_lo = std::log(grid.lo), log_hi = std::log(grid.hi);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(i) /
                                             static_cast<double>(n - 1));
      const cd s(0.0, w);
      const cd c = gains.kp + gains.ki / s + gains.kd * s / (tf * s + 1.0);
      const cd g = model.k * std::exp(-model.theta_d * s) / (model.tau1 * s + 1.0);
      const double mag = 1.0 / std::abs(1.0 + c * g);
      if (mag > res.ms) {
        res.ms = mag;
        res.omega_at_max = w;
      }
      if (prev > 0.0 && std::abs(mag - prev) > 0.05 * std::max(prev, mag))
        res.grid_ok = false;
      prev = mag;
    }
  };

  SensitivityResult res;
  std::size_t n = grid.n;
  sweep(n, res);
  for (int pass = 0; pass < 2 && !res.grid_ok; ++pass) {
    n *= 2;
    sweep(n, res);
  }
  return res;
}

}  // namespace tanktune
