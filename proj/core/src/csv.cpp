#include "tanktune/csv.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tanktune {

const char* kProcessCsvHeader =
    "t_s,level_sp_cm,level_cm,flow_sp,flow,pump_pct,u_hat,u,episode_id";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void atomic_write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

void write_process_csv(const std::string& path, const std::vector<ProcessRow>& rows) {
  std::ostringstream out;
  out << kProcessCsvHeader << "\n";
  for (const ProcessRow& r : rows) {
    out << format_double(r.t) << ',' << format_double(r.level_sp) << ','
        << format_double(r.level) << ',' << format_double(r.flow_sp) << ','
        << format_double(r.flow) << ',' << format_double(r.pump_pct) << ','
        << format_double(r.u_hat) << ',' << format_double(r.u) << ','
        << r.episode_id << "\n";
  }
  atomic_write_text(path, out.str());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::vector<ProcessRow> read_process_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty process file: " + path);
  std::vector<ProcessRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) throw std::runtime_error("bad process row in " + path);
    ProcessRow r;
    r.t = std::stod(f[0]);
    r.level_sp = std::stod(f[1]);
    r.level = std::stod(f[2]);
    r.flow_sp = std::stod(f[3]);
    r.flow = std::stod(f[4]);
    r.pump_pct = std::stod(f[5]);
    r.u_hat = std::stod(f[6]);
    r.u = std::stod(f[7]);
    r.episode_id = std::stoi(f[8]);
    rows.push_back(r);
  }
  return rows;
}

void write_gains_csv(const std::string& path, const std::vector<GainsRecord>& records) {
  std::ostringstream out;
  out << "timestamp,k_p,k_i,k_d,k_tau\n";
  for (const GainsRecord& rec : records) {
    out << format_double(rec.timestamp) << ',' << format_double(rec.gains.kp) << ','
        << format_double(rec.gains.ki) << ',' << format_double(rec.gains.kd) << ','
        << format_double(rec.gains.ktau) << "\n";
  }
  atomic_write_text(path, out.str());
}

GainsRecord read_gains_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty gains file: " + path);
  GainsRecord rec;
  bool have_row = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw std::runtime_error("bad gains row in " + path);
    rec.timestamp = std::stod(f[0]);
    rec.gains.kp = std::stod(f[1]);
    rec.gains.ki = std::stod(f[2]);
    rec.gains.kd = std::stod(f[3]);
    rec.gains.ktau = std::stod(f[4]);
    have_row = true;
  }
  if (!have_row) throw std::runtime_error("gains file has no rows: " + path);
  return rec;
}

}  // namespace tanktune
