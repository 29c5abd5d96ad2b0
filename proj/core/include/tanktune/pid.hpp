#pragma once

namespace tanktune {

// Gains of the incremental-form controller
//   u_hat = kp*d_e + ki*(dt*e) + kd*(-d2y_f) + ktau*(dt*e_u) + u_prev
// where d2y_f is the low-pass-filtered second difference of the output and
// e_u = u_hat_prev - u_prev is the saturation discrepancy fed back as an
// anti-windup term.
struct PidGains {
  double kp = 0.0;    // dimensionless
  double ki = 0.0;    // 1/s
  double kd = 0.0;    // s
  double ktau = 0.0;  // anti-windup weight, in [0,1]
};

// Per-loop memory carried between control steps.
struct PidState {
  double t_f = 0.1;  // derivative smoothing factor, in [0,1]
  double dt = 1.0;   // control interval, s
  double e_prev = 0.0;
  double dy_f_prev = 0.0;  // filtered first difference of y, units/s
  double y_prev = 0.0;
  double u_prev = 0.0;
  double u_hat_prev = 0.0;
  bool primed = false;  // false until the first measurement is absorbed
};

PidState make_pid_state(double t_f, double dt, double u0);

// Re-arms the state for a fresh episode while keeping the actuation level,
// so the first post-reset step is bumpless. The next observation primes the
// memories and reports zero differences.
void reset(PidState& state, double u0);

// Episode reset used by the live loop: memories are primed from the current
// operating point (pre-step setpoint and measurement), so a setpoint change
// on the next step produces the full proportional kick while the derivative
// path starts clean.
void reset_primed(PidState& state, double u0, double setpoint, double y);

// The five observation components consumed by the controller and by the RL
// state: [d_e, dt*e, -d2y_f, dt*e_u, u_prev].
struct Observation {
  double d_e = 0.0;
  double i_e = 0.0;
  double neg_d2y = 0.0;
  double aw = 0.0;
  double u_prev = 0.0;
};

struct FilteredDiff {
  double neg_d2y = 0.0;  // -(dy_f - dy_f_prev)/dt
  double dy_f = 0.0;
};

// Advances the filtered-difference recursion
//   dy_f   = t_f*dy_f_prev + (1-t_f)*(y - y_prev)/dt
//   d2y_f  = (dy_f - dy_f_prev)/dt
// The first call after reset returns zeros and seeds y_prev.
FilteredDiff filtered_second_difference(PidState& state, double y_t);

// Builds the observation for the current measurement and commits the
// measurement-side memories (e_prev, y_prev, dy_f_prev). Call exactly once
// per control step, before pid_step.
Observation compute_observation(PidState& state, double setpoint, double y_t);

struct PidOutput {
  double u = 0.0;      // saturated input sent to the plant
  double u_hat = 0.0;  // raw controller proposal
};

// One incremental control step. Commits the actuation-side memories
// (u_prev, u_hat_prev). Throws std::invalid_argument if u_min >= u_max.
PidOutput pid_step(const PidGains& gains, PidState& state, const Observation& obs,
                   double u_min, double u_max);

}  // namespace tanktune
