#include "tanktune/plant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tanktune {

namespace {

constexpr double kPi = 3.14159265358979323846;

double tank_area(const PlantParams& params) {
  return kPi * params.r_tank * params.r_tank;
}

double min_positive_tau(const PlantParams& params) {
  double m = std::numeric_limits<double>::infinity();
  for (double tau : {params.tau_p, params.tau_in, params.tau_out, params.tau_m}) {
    if (tau > 0.0) m = std::min(m, tau);
  }
  return m;
}

size_t delay_samples(const PlantParams& params, double dt) {
  return static_cast<size_t>(std::llround(params.transport_delay / dt));
}

struct StageState {
  double p, f_in, f_out, level, m;
};

PlantDeriv rhs(const StageState& s, double pump_cmd, const PlantParams& params) {
  PlantDeriv d;
  const double p_eff = params.tau_p > 0.0 ? s.p : pump_cmd;
  const double fin_target = params.f_max * (p_eff / 100.0);
  const double f_in_eff = params.tau_in > 0.0 ? s.f_in : fin_target;
  const double level_pos = std::max(s.level, 0.0);
  const double fout_target =
      params.outflow_scale * kPi * params.r_pipe * params.r_pipe * params.f_c *
      std::sqrt(2.0 * params.g * level_pos);
  const double f_out_eff = params.tau_out > 0.0 ? s.f_out : fout_target;

  d.dp = params.tau_p > 0.0 ? (pump_cmd - s.p) / params.tau_p : 0.0;
  d.df_in = params.tau_in > 0.0 ? (fin_target - s.f_in) / params.tau_in : 0.0;
  d.df_out = params.tau_out > 0.0 ? (fout_target - s.f_out) / params.tau_out : 0.0;
  d.dlevel = (f_in_eff - f_out_eff) / tank_area(params);
  d.dm = params.tau_m > 0.0 ? (s.level - s.m) / params.tau_m : 0.0;
  d.dvol = f_in_eff - f_out_eff;
  return d;
}

}  // namespace

void validate(const PlantParams& params) {
  if (!(params.r_tank > 0.0 && params.r_pipe > 0.0 && params.f_c > 0.0 &&
        params.f_max > 0.0 && params.g > 0.0))
    throw std::invalid_argument("plant: r_tank, r_pipe, f_c, f_max, g must be positive");
  if (params.tau_p < 0.0 || params.tau_in < 0.0 || params.tau_out < 0.0 ||
      params.tau_m < 0.0 || params.transport_delay < 0.0)
    throw std::invalid_argument("plant: time constants must be non-negative");
  if (!(params.outflow_scale > 0.0 && params.outflow_scale <= 1.0))
    throw std::invalid_argument("plant: outflow_scale must be in (0,1]");
}

double filter_step(double y_prev, double y_hat, double tau, double dt) {
  if (!(std::isfinite(y_prev) && std::isfinite(y_hat)))
    throw std::invalid_argument("filter_step: non-finite input");
  if (tau < 0.0 || dt <= 0.0)
    throw std::invalid_argument("filter_step: tau must be >= 0 and dt > 0");
  if (tau == 0.0) return y_hat;
  return y_hat + (y_prev - y_hat) * std::exp(-dt / tau);
}

double outflow_coeff(const PlantParams& params) {
  return kPi * params.r_pipe * params.r_pipe * params.f_c * std::sqrt(2.0 * params.g);
}

PlantDeriv plant_derivatives(const PlantState& state, double pump_cmd_pct,
                             const PlantParams& params) {
  StageState s{state.p, state.f_in, state.f_out, state.level, state.measured_level};
  return rhs(s, std::clamp(pump_cmd_pct, 0.0, 100.0), params);
}

void step_plant(PlantState& state, double pump_cmd_pct, const PlantParams& params,
                double dt) {
  if (dt <= 0.0) throw std::invalid_argument("step_plant: dt must be positive");
  if (dt > min_positive_tau(params) / 2.0)
    throw std::invalid_argument("step_plant: integration step too coarse");
  const double cmd = std::clamp(pump_cmd_pct, 0.0, 100.0);

  const StageState y0{state.p, state.f_in, state.f_out, state.level,
                      state.measured_level};
  auto advance = [](const StageState& s, const PlantDeriv& d, double h) {
    return StageState{s.p + h * d.dp, s.f_in + h * d.df_in, s.f_out + h * d.df_out,
                      s.level + h * d.dlevel, s.m + h * d.dm};
  };
  const PlantDeriv k1 = rhs(y0, cmd, params);
  const PlantDeriv k2 = rhs(advance(y0, k1, dt / 2.0), cmd, params);
  const PlantDeriv k3 = rhs(advance(y0, k2, dt / 2.0), cmd, params);
  const PlantDeriv k4 = rhs(advance(y0, k3, dt), cmd, params);

  auto blend = [&](double a, double b, double c, double d) {
    return dt / 6.0 * (a + 2.0 * b + 2.0 * c + d);
  };
  state.p = y0.p + blend(k1.dp, k2.dp, k3.dp, k4.dp);
  state.f_in = y0.f_in + blend(k1.df_in, k2.df_in, k3.df_in, k4.df_in);
  state.f_out = y0.f_out + blend(k1.df_out, k2.df_out, k3.df_out, k4.df_out);
  state.level = y0.level + blend(k1.dlevel, k2.dlevel, k3.dlevel, k4.dlevel);
  state.measured_level = y0.m + blend(k1.dm, k2.dm, k3.dm, k4.dm);
  state.net_volume += blend(k1.dvol, k2.dvol, k3.dvol, k4.dvol);

  // Algebraic states when the corresponding filter is disabled.
  if (params.tau_p == 0.0) state.p = cmd;
  if (params.tau_in == 0.0) state.f_in = params.f_max * (state.p / 100.0);
  if (params.tau_out == 0.0)
    state.f_out = params.outflow_scale * outflow_coeff(params) *
                  std::sqrt(std::max(state.level, 0.0));
  if (params.tau_m == 0.0) state.measured_level = state.level;

  state.p = std::clamp(state.p, 0.0, 100.0);
  state.level = std::max(state.level, 0.0);
  state.f_in = std::max(state.f_in, 0.0);
  state.f_out = std::max(state.f_out, 0.0);
}

FlowLoop make_flow_loop(double sample_dt, double u0) {
  FlowLoop loop;
  loop.gains.kp = 0.2;
  loop.gains.ki = loop.gains.kp / 3.0;
  loop.gains.kd = 0.67 * loop.gains.kp;
  loop.gains.ktau = 0.0;
  loop.state = make_pid_state(0.1, sample_dt, u0);
  return loop;
}

double steady_flow_for_level(double level, const PlantParams& params) {
  return params.outflow_scale * outflow_coeff(params) * std::sqrt(std::max(level, 0.0));
}

double steady_level_for_flow(double flow, const PlantParams& params) {
  const double q = flow / (params.outflow_scale * outflow_coeff(params));
  return q * q;
}

PlantState steady_state_for_flow(double flow, const PlantParams& params, double dt) {
  PlantState s;
  s.f_in = flow;
  s.f_out = flow;
  s.p = 100.0 * flow / params.f_max;
  s.level = steady_level_for_flow(flow, params);
  s.measured_level = s.level;
  s.delay_buffer.assign(delay_samples(params, dt), flow);
  return s;
}

PlantState steady_state_for_pump(double pump_pct, const PlantParams& params) {
  PlantState s;
  s.p = std::clamp(pump_pct, 0.0, 100.0);
  s.f_in = params.f_max * (s.p / 100.0);
  s.f_out = s.f_in;
  s.level = steady_level_for_flow(s.f_in, params);
  s.measured_level = s.level;
  return s;
}

namespace {

int substeps(double control_dt, double integrator_dt) {
  if (control_dt <= 0.0 || integrator_dt <= 0.0)
    throw std::invalid_argument("plant: intervals must be positive");
  const int n = static_cast<int>(std::llround(control_dt / integrator_dt));
  if (n < 1 || std::abs(n * integrator_dt - control_dt) > 1e-9 * control_dt)
    throw std::invalid_argument("plant: control_dt must be a multiple of integrator_dt");
  return n;
}

}  // namespace

FlowIntervalLog advance_flow_interval(PlantState& state, double flow_sp_cmd,
                                      FlowLoop& flow, const PlantParams& params,
                                      double control_dt, double integrator_dt) {
  const int n = substeps(control_dt, integrator_dt);
  const size_t cap = delay_samples(params, integrator_dt);

  // The inner controller runs at the integrator rate, like a PLC loop that is
  // fast relative to the supervisory level controller. When the pump and
  // inflow dynamics are algebraic (tau_p = tau_in = 0) the loop's continuous
  // limit is exact tracking, so the discrete PID is replaced by the inverted
  // pump map.
  const bool algebraic_inner = params.tau_p == 0.0 && params.tau_in == 0.0;
  FlowIntervalLog log;
  for (int k = 0; k < n; ++k) {
    const double eff =
        state.delay_buffer.empty() ? flow_sp_cmd : state.delay_buffer.front();
    double pump_cmd;
    if (algebraic_inner) {
      pump_cmd = std::clamp(100.0 * eff / params.f_max, 0.0, 100.0);
    } else {
      const Observation obs = compute_observation(flow.state, eff, state.f_in);
      pump_cmd = pid_step(flow.gains, flow.state, obs, 0.0, 100.0).u;
    }
    if (cap > 0) {
      state.delay_buffer.push_back(flow_sp_cmd);
      while (state.delay_buffer.size() > cap) state.delay_buffer.pop_front();
    }
    step_plant(state, pump_cmd, params, integrator_dt);
    if (k == 0) log.flow_sp_eff = eff;
    log.pump_cmd = pump_cmd;
  }
  return log;
}

void advance_pump_interval(PlantState& state, double pump_cmd_pct,
                           const PlantParams& params, double control_dt,
                           double integrator_dt) {
  const int n = substeps(control_dt, integrator_dt);
  for (int k = 0; k < n; ++k) step_plant(state, pump_cmd_pct, params, integrator_dt);
}

LoopRecord closed_loop_step(PlantState& state, double level_setpoint,
                            const PidGains& level_gains, PidState& level_state,
                            FlowLoop& flow, const PlantParams& params,
                            double u_min, double u_max, double control_dt,
                            double integrator_dt) {
  LoopRecord rec;
  rec.level_sp = level_setpoint;
  rec.level = state.measured_level;

  const Observation obs =
      compute_observation(level_state, level_setpoint, state.measured_level);
  const PidOutput out = pid_step(level_gains, level_state, obs, u_min, u_max);
  rec.u = out.u;
  rec.u_hat = out.u_hat;
  rec.flow = state.f_in;

  const FlowIntervalLog inner =
      advance_flow_interval(state, out.u, flow, params, control_dt, integrator_dt);
  rec.flow_sp = inner.flow_sp_eff;
  rec.pump_pct = inner.pump_cmd;
  return rec;
}

}  // namespace tanktune
