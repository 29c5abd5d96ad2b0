#include "tanktune/fopdt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tanktune {

FopdtModel reference_model() { return FopdtModel{3.44, 301.19, 9.21}; }

const std::vector<double>& reference_tc_grid() {
  static const std::vector<double> grid{9.21, 15.0, 20.0, 25.0, 30.0};
  return grid;
}

namespace {

// First time y crosses `target`, linearly interpolated, searching from
// index `from`.
double crossing_time(const std::vector<double>& times, const std::vector<double>& y,
                     std::size_t from, double target, bool rising) {
  for (std::size_t i = from + 1; i < y.size(); ++i) {
    const bool crossed = rising ? (y[i] >= target) : (y[i] <= target);
    if (!crossed) continue;
    const double y0 = y[i - 1], y1 = y[i];
    if (y1 == y0) return times[i];
    const double f = (target - y0) / (y1 - y0);
    return times[i - 1] + f * (times[i] - times[i - 1]);
  }
  throw std::runtime_error("fopdt fit: response never crosses target fraction");
}

}  // namespace

FopdtModel fit_fopdt(const std::vector<double>& times, const std::vector<double>& u,
                     const std::vector<double>& y) {
  if (times.size() != u.size() || times.size() != y.size() || times.size() < 8)
    throw std::invalid_argument("fopdt fit: need matched time/input/output arrays");

  std::size_t step_idx = 0;
  for (std::size_t i = 1; i < u.size(); ++i) {
    if (std::abs(u[i] - u[0]) > 1e-12) {
      step_idx = i;
      break;
    }
  }
  if (step_idx == 0) throw std::invalid_argument("fopdt fit: input contains no step");
  const double du = u.back() - u[0];

  double y0 = 0.0;
  for (std::size_t i = 0; i < step_idx; ++i) y0 += y[i];
  y0 /= static_cast<double>(step_idx);

  const std::size_t tail = std::max<std::size_t>(times.size() / 10, 2);
  double y_ss = 0.0;
  for (std::size_t i = times.size() - tail; i < times.size(); ++i) y_ss += y[i];
  y_ss /= static_cast<double>(tail);

  // Aitken extrapolation of the tail removes the residual exponential creep
  // from the plateau estimate; it is exact for first-order tails and falls
  // back to the tail mean when the data is already flat.
  {
    const std::size_t span = (times.size() - step_idx) / 4;
    const std::size_t last = times.size() - 1;
    if (span >= 2 && last >= 2 * span) {
      const double y1 = y[last - 2 * span], y2 = y[last - span], y3 = y[last];
      const double d1 = y2 - y1, d2 = y3 - y2;
      const double denom = d1 - d2;
      const double rough = std::abs(y3 - y0);
      if (rough > 0.0 && std::abs(denom) > 1e-9 * rough) {
        const double cand = y3 + d2 * d2 / denom;
        if (std::abs(cand - y3) <= 0.05 * rough) y_ss = cand;
      }
    }
  }

  const double dy = y_ss - y0;
  if (std::abs(dy) < 1e-12) throw std::runtime_error("fopdt fit: output did not move");
  for (std::size_t i = times.size() - tail; i < times.size(); ++i) {
    if (std::abs(y[i] - y_ss) > 0.01 * std::abs(dy))
      throw std::runtime_error("response not settled");
  }

  const bool rising = dy > 0.0;
  const double frac28 = 1.0 - std::exp(-1.0 / 3.0);  // 0.28347
  const double frac63 = 1.0 - std::exp(-1.0);        // 0.63212
  const double t_step = times[step_idx];
  const double t28 = crossing_time(times, y, step_idx - 1, y0 + frac28 * dy, rising) - t_step;
  const double t63 = crossing_time(times, y, step_idx - 1, y0 + frac63 * dy, rising) - t_step;

  FopdtModel model;
  model.k = dy / du;
  model.tau1 = 1.5 * (t63 - t28);
  model.theta_d = std::max(0.0, t63 - model.tau1);
  if (model.tau1 <= 0.0) throw std::runtime_error("fopdt fit: degenerate time constant");
  return model;
}

std::vector<double> fopdt_step_response(const FopdtModel& model, double du,
                                        double y0, const std::vector<double>& times,
                                        double t_step) {
  std::vector<double> y(times.size(), y0);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i] - t_step - model.theta_d;
    if (t > 0.0) y[i] = y0 + model.k * du * (1.0 - std::exp(-t / model.tau1));
  }
  return y;
}

PidGains simc_pi(const FopdtModel& model, double tc) {
  if (tc <= 0.0) throw std::invalid_argument("simc: tc must be positive");
  if (model.tau1 <= 0.0 || model.k == 0.0)
    throw std::invalid_argument("simc: model must have tau1 > 0 and k != 0");
  PidGains gains;
  gains.kp = model.tau1 / (model.k * (tc + model.theta_d));
  const double ti = std::min(model.tau1, 4.0 * (tc + model.theta_d));
  gains.ki = gains.kp / ti;
  gains.kd = 0.0;
  gains.ktau = 0.5;
  return gains;
}

}  // namespace tanktune
