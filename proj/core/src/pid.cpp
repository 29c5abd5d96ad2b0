#include "tanktune/pid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tanktune {

PidState make_pid_state(double t_f, double dt, double u0) {
  if (t_f < 0.0 || t_f > 1.0) throw std::invalid_argument("pid: t_f must be in [0,1]");
  if (dt <= 0.0) throw std::invalid_argument("pid: dt must be positive");
  PidState s;
  s.t_f = t_f;
  s.dt = dt;
  s.u_prev = u0;
  s.u_hat_prev = u0;
  return s;
}

void reset(PidState& state, double u0) {
  state.e_prev = 0.0;
  state.dy_f_prev = 0.0;
  state.y_prev = 0.0;
  state.u_prev = u0;
  state.u_hat_prev = u0;
  state.primed = false;
}

void reset_primed(PidState& state, double u0, double setpoint, double y) {
  state.e_prev = setpoint - y;
  state.dy_f_prev = 0.0;
  state.y_prev = y;
  state.u_prev = u0;
  state.u_hat_prev = u0;
  state.primed = true;
}

FilteredDiff filtered_second_difference(PidState& state, double y_t) {
  if (!std::isfinite(y_t)) throw std::invalid_argument("pid: non-finite measurement");
  FilteredDiff out;
  if (!state.primed) {
    state.primed = true;
    state.y_prev = y_t;
    state.dy_f_prev = 0.0;
    return out;
  }
  const double dy = (y_t - state.y_prev) / state.dt;
  const double dy_f = state.t_f * state.dy_f_prev + (1.0 - state.t_f) * dy;
  out.neg_d2y = -(dy_f - state.dy_f_prev) / state.dt;
  out.dy_f = dy_f;
  state.dy_f_prev = dy_f;
  state.y_prev = y_t;
  return out;
}

Observation compute_observation(PidState& state, double setpoint, double y_t) {
  const bool first = !state.primed;
  const double e = setpoint - y_t;
  Observation obs;
  obs.neg_d2y = filtered_second_difference(state, y_t).neg_d2y;
  obs.i_e = state.dt * e;
  obs.d_e = first ? 0.0 : e - state.e_prev;
  obs.aw = first ? 0.0 : state.dt * (state.u_hat_prev - state.u_prev);
  obs.u_prev = state.u_prev;
  state.e_prev = e;
  return obs;
}

PidOutput pid_step(const PidGains& gains, PidState& state, const Observation& obs,
                   double u_min, double u_max) {
  if (!(u_min < u_max)) throw std::invalid_argument("pid: u_min must be below u_max");
  PidOutput out;
  out.u_hat = gains.kp * obs.d_e + gains.ki * obs.i_e + gains.kd * obs.neg_d2y +
              gains.ktau * obs.aw + state.u_prev;
  out.u = std::clamp(out.u_hat, u_min, u_max);
  state.u_prev = out.u;
  state.u_hat_prev = out.u_hat;
  return out;
}

}  // namespace tanktune
