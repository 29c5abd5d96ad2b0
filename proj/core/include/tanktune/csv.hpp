#pragma once

#include <string>
#include <vector>

#include "tanktune/pid.hpp"

namespace tanktune {

// One control-step record of the process data exchange. Column order:
//   t_s,level_sp_cm,level_cm,flow_sp,flow,pump_pct,u_hat,u,episode_id
struct ProcessRow {
  double t = 0.0;
  double level_sp = 0.0;
  double level = 0.0;    // measured level
  double flow_sp = 0.0;  // delayed setpoint tracked by the flow loop
  double flow = 0.0;
  double pump_pct = 0.0;
  double u_hat = 0.0;  // raw level-controller proposal
  double u = 0.0;      // saturated level-controller output
  int episode_id = 0;
};

extern const char* kProcessCsvHeader;

// Writes atomically (temp file + rename).
void write_process_csv(const std::string& path, const std::vector<ProcessRow>& rows);
std::vector<ProcessRow> read_process_csv(const std::string& path);

// PID parameter exchange file, one row per update:
//   timestamp,k_p,k_i,k_d,k_tau
// The writer replaces the file atomically; the reader returns the last row.
struct GainsRecord {
  double timestamp = 0.0;
  PidGains gains;
};
void write_gains_csv(const std::string& path, const std::vector<GainsRecord>& records);
GainsRecord read_gains_csv(const std::string& path);

// Number formatting shared by all emitted files so outputs are reproducible.
std::string format_double(double v);

void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace tanktune
