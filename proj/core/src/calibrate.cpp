#include "tanktune/calibrate.hpp"

#include <cmath>
#include <stdexcept>

namespace tanktune {

namespace {

// Runs the inner loop at a held flow setpoint, sampling (t, u, y) per
// control step into the output arrays.
void run_segment(PlantState& state, FlowLoop& flow, double flow_sp,
                 const PlantParams& params, double control_dt, double integrator_dt,
                 double duration, double& t, std::vector<double>& times,
                 std::vector<double>& u, std::vector<double>& y) {
  const int steps = static_cast<int>(std::llround(duration / control_dt));
  for (int k = 0; k < steps; ++k) {
    times.push_back(t);
    u.push_back(flow_sp);
    y.push_back(state.measured_level);
    advance_flow_interval(state, flow_sp, flow, params, control_dt, integrator_dt);
    t += control_dt;
  }
}

}  // namespace

CalibrationResult calibrate_to_fopdt(const PlantParams& params, double step_size,
                                     double operating_level, double control_dt,
                                     double integrator_dt) {
  validate(params);
  if (step_size <= 0.0)
    throw std::invalid_argument("calibrate: step_size must be positive");

  const double f0 = steady_flow_for_level(operating_level, params);
  PlantState state = steady_state_for_flow(f0, params, integrator_dt);
  FlowLoop flow = make_flow_loop(integrator_dt, state.p);

  // Flush controller transients before stepping.
  double t = 0.0;
  {
    std::vector<double> ts, us, ys;
    run_segment(state, flow, f0, params, control_dt, integrator_dt, 120.0, t, ts, us, ys);
  }

  const double pre = 60.0;
  const double horizon = 1800.0;
  auto identify = [&](double from, double to) {
    std::vector<double> ts, us, ys;
    run_segment(state, flow, from, params, control_dt, integrator_dt, pre, t, ts, us, ys);
    run_segment(state, flow, to, params, control_dt, integrator_dt, horizon, t, ts, us, ys);
    try {
      return fit_fopdt(ts, us, ys);
    } catch (const std::runtime_error&) {
      throw std::runtime_error("plant not calibratable at this operating point");
    }
  };

  CalibrationResult result;
  result.up = identify(f0, f0 + step_size);
  result.down = identify(f0 + step_size, f0);
  result.model.k = 0.5 * (result.up.k + result.down.k);
  result.model.tau1 = 0.5 * (result.up.tau1 + result.down.tau1);
  result.model.theta_d = 0.5 * (result.up.theta_d + result.down.theta_d);
  return result;
}

}  // namespace tanktune
