#pragma once

#include "tanktune/fopdt.hpp"
#include "tanktune/plant.hpp"

namespace tanktune {

struct CalibrationResult {
  FopdtModel model;  // average of the two fits
  FopdtModel up;
  FopdtModel down;
};

// Identifies the flow-setpoint -> level dynamics around an operating level:
// settles the inner loop there, steps the flow setpoint up and then back
// down, and fits a FOPDT model to each settled response. Throws
// "plant not calibratable at this operating point" when a response does not
// settle.
CalibrationResult calibrate_to_fopdt(const PlantParams& params, double step_size,
                                     double operating_level = 60.0,
                                     double control_dt = 1.0,
                                     double integrator_dt = 0.1);

}  // namespace tanktune
