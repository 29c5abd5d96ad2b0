#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tanktune/fopdt.hpp"
#include "tanktune/pid.hpp"

namespace tanktune {

// Stage-cost family. Rewards are the negated costs.
enum class RewardKind {
  PowerPenalty,    // |e|^p + lambda*|du|^q
  Hybrid,          // |e| if |e| < 1, else (e^2+1)/2
  HybridPenalty,   // hybrid + lambda*du^2
  AbsPenalty,      // |e| + lambda*du^2
  SquarePenalty,   // e^2 + lambda*du^2
};

struct RewardSpec {
  RewardKind kind = RewardKind::AbsPenalty;
  double lambda = 0.1;
  int p = 1;
  int q = 2;
};

// Parses the CLI names: eq17 (abs+0.1du^2), eq12 (hybrid), eqB1
// (squared+0.1du^2), eqB2 (hybrid+0.1du^2).
RewardSpec reward_spec_from_name(const std::string& name);
std::string reward_name(const RewardSpec& spec);

double cost(const RewardSpec& spec, double e, double du);

// The normalization heuristic lambda = 1/|du|_max.
double suggest_lambda(double du_max);

// Scorecard statistics for one setpoint step change. iae/ise/tv use the
// error divided by the setpoint change; tv_u divides by the initial input
// change. The *_raw fields keep the unnormalized sums.
struct StepMetrics {
  double iae = 0.0;
  double ise = 0.0;
  double tv = 0.0;
  double tv_u = 0.0;
  double percent_os = 0.0;
  double settling_time = 0.0;
  bool settled = false;
  bool tv_u_defined = false;
  double iae_raw = 0.0;
  double ise_raw = 0.0;
  double tv_raw = 0.0;
  double tv_u_raw = 0.0;
  double os_raw = 0.0;
  double epsilon = 0.0;
  double ms = 0.0;  // filled by callers that evaluate robustness
};

// Computes Eq.-style discrete sums over uniformly sampled data following a
// step from setpoint_before to setpoint_after at times.front(). epsilon <= 0
// selects the default 2% of |setpoint change| settling band. tv_on_error
// switches the TV base signal between the normalized error (default) and the
// raw output.
StepMetrics step_metrics(const std::vector<double>& times,
                         const std::vector<double>& y, const std::vector<double>& u,
                         double setpoint_before, double setpoint_after,
                         double epsilon = 0.0, bool tv_on_error = true);

struct OmegaGrid {
  double lo = 1e-4;   // rad/s
  double hi = 1e2;    // rad/s
  std::size_t n = 2000;
};

struct SensitivityResult {
  double ms = 1.0;
  double omega_at_max = 0.0;
  bool grid_ok = true;  // false if neighbouring |S| still differ > 5%
};

// Peak of |1/(1 + C(iw)G(iw))| with C(s) = kp + ki/s + kd*s/(tf*s+1) and
// G(s) = k e^{-theta_d s}/(tau1 s + 1). Refines the grid up to twice if the
// sweep is too coarse.
SensitivityResult max_sensitivity(const PidGains& gains, const FopdtModel& model,
                                  double tf = 0.1, OmegaGrid grid = {});

}  // namespace tanktune
