#pragma once

#include <deque>

#include "tanktune/pid.hpp"

namespace tanktune {

// Physical constants of the two-tank rig. Lengths in cm, flows in cm^3/s,
// times in s. The defaults are the shipped calibration: they make the
// flow-setpoint -> level response around the 60 cm operating point fit
// k ~ 3.44, tau1 ~ 301 s, theta_d ~ 9.2 s (see tools/calibrate and the
// baseline tests).
struct PlantParams {
  double r_tank = 5.3021;    // top tank radius
  double r_pipe = 0.19735;   // outflow pipe radius
  double f_c = 0.85;         // outflow discharge coefficient
  double f_max = 1000.0;     // pump flow at 100%
  double tau_p = 1.0;        // pump speed filter
  double tau_in = 2.0;       // inflow filter
  double tau_out = 2.0;      // outflow filter
  double tau_m = 1.0;        // level measurement filter
  double g = 981.0;          // cm/s^2
  double transport_delay = 6.5;  // on the flow-setpoint path
  double outflow_scale = 1.0;    // (0,1]; 0.5 models the half-closed valve
};

void validate(const PlantParams& params);

// Instantaneous state. net_volume integrates f_in - f_out with the same
// scheme as the level, which makes volume bookkeeping exact.
struct PlantState {
  double p = 0.0;       // pump speed, %
  double f_in = 0.0;    // cm^3/s
  double f_out = 0.0;   // cm^3/s
  double level = 0.0;   // cm
  double measured_level = 0.0;  // cm
  double net_volume = 0.0;      // cm^3, diagnostic integral
  std::deque<double> delay_buffer;  // pending flow-setpoint samples
};

enum class CommandMode { PumpSetpoint, FlowSetpoint };

struct PlantCommand {
  CommandMode mode = CommandMode::PumpSetpoint;
  double value = 0.0;  // % for pump mode, cm^3/s for flow mode
};

// Exact update of tau*y' + y = y_hat over one step; tau = 0 passes y_hat
// through.
double filter_step(double y_prev, double y_hat, double tau, double dt);

struct PlantDeriv {
  double dp = 0.0;
  double df_in = 0.0;
  double df_out = 0.0;
  double dlevel = 0.0;
  double dm = 0.0;
  double dvol = 0.0;
};

// Right-hand side of the tank ODEs for a held pump command (already
// saturated to [0,100]). States with tau = 0 are treated algebraically and
// report zero derivative.
PlantDeriv plant_derivatives(const PlantState& state, double pump_cmd_pct,
                             const PlantParams& params);

// pi*r_pipe^2*f_c*sqrt(2g): outflow is outflow_scale * this * sqrt(level).
double outflow_coeff(const PlantParams& params);

// One fixed-step RK4 advance under a held pump command. Enforces
// p in [0,100] and level >= 0 afterwards. Throws if dt exceeds half the
// smallest positive time constant.
void step_plant(PlantState& state, double pump_cmd_pct, const PlantParams& params,
                double dt);

// The inner flow controller; fixed and part of the environment.
struct FlowLoop {
  PidGains gains;
  PidState state;
};

// kp = 0.2, ki = kp/3, kd = 0.67*kp, T_f = 0.1 at the given sample time
// (normally the integrator step; the inner loop runs faster than the level
// controller).
FlowLoop make_flow_loop(double sample_dt, double u0);

// Analytic fixed points.
double steady_flow_for_level(double level, const PlantParams& params);
double steady_level_for_flow(double flow, const PlantParams& params);
PlantState steady_state_for_flow(double flow, const PlantParams& params, double dt);
PlantState steady_state_for_pump(double pump_pct, const PlantParams& params);

// Advances one control interval under a commanded flow setpoint: the command
// passes through the transport-delay buffer, the flow PID runs once on the
// delayed setpoint, and the plant integrates at integrator_dt substeps.
struct FlowIntervalLog {
  double flow_sp_eff = 0.0;  // delayed setpoint the flow PID tracked
  double pump_cmd = 0.0;     // saturated pump command held over the interval
};
FlowIntervalLog advance_flow_interval(PlantState& state, double flow_sp_cmd,
                                      FlowLoop& flow, const PlantParams& params,
                                      double control_dt, double integrator_dt);

// Advances one control interval under a held pump command (open loop).
void advance_pump_interval(PlantState& state, double pump_cmd_pct,
                           const PlantParams& params, double control_dt,
                           double integrator_dt);

struct LoopRecord {
  double level_sp = 0.0;
  double level = 0.0;     // measured level the controller saw
  double flow_sp = 0.0;   // delayed setpoint tracked by the flow loop
  double flow = 0.0;      // f_in
  double pump_pct = 0.0;  // pump command
  double u_hat = 0.0;     // raw level-PID proposal
  double u = 0.0;         // saturated level-PID output (commanded flow sp)
};

// One cascaded control step: level PID -> flow setpoint -> (delay) -> flow
// PID -> pump, then the plant integrates over the control interval.
LoopRecord closed_loop_step(PlantState& state, double level_setpoint,
                            const PidGains& level_gains, PidState& level_state,
                            FlowLoop& flow, const PlantParams& params,
                            double u_min, double u_max, double control_dt,
                            double integrator_dt);

}  // namespace tanktune
