#pragma once

#include <vector>

#include "tanktune/pid.hpp"

namespace tanktune {

// First-order-plus-dead-time model k e^{-theta_d s}/(tau1 s + 1).
struct FopdtModel {
  double k = 0.0;
  double tau1 = 0.0;
  double theta_d = 0.0;
};

// The model identified on the reference rig, and the closed-loop time
// constants evaluated against it.
FopdtModel reference_model();                 // k=3.44, tau1=301.19, theta_d=9.21
const std::vector<double>& reference_tc_grid();  // {9.21, 15, 20, 25, 30}

// Two-point identification from a single step response: k from the plateau
// change, tau1 = 1.5*(t63 - t28), theta_d = t63 - tau1 (clamped at zero).
// Crossing times are interpolated between samples. Throws
// std::runtime_error("response not settled") if the final 10% of samples
// deviate more than 1% of the output change.
FopdtModel fit_fopdt(const std::vector<double>& times, const std::vector<double>& u,
                     const std::vector<double>& y);

// Analytic step response y(t) = y0 + k*du*(1 - e^{-(t-theta)/tau}) for t >=
// theta; the test oracle for fit_fopdt.
std::vector<double> fopdt_step_response(const FopdtModel& model, double du,
                                        double y0, const std::vector<double>& times,
                                        double t_step);

// SIMC PI rule for a first-order-plus-dead-time model:
//   kp = tau1/(k*(tc+theta_d)), Ti = min(tau1, 4*(tc+theta_d)), ki = kp/Ti.
// kd is zero and ktau defaults to 0.5.
PidGains simc_pi(const FopdtModel& model, double tc);

}  // namespace tanktune
