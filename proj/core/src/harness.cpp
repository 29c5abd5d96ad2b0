#include "tanktune/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace tanktune {

PidGains init_gains_for_kp(double kp) {
  if (kp <= 0.0) throw std::invalid_argument("init gains: kp must be positive");
  return PidGains{kp, kp / 60.0, 0.01 * kp, 0.5};
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

void apply_constrained_protocol(ExperimentConfig& cfg) {
  cfg.constrained = true;
  cfg.train_targets = {65.0, 60.0, 63.0, 60.0};
  cfg.td3.use_inverting_gradients = true;
  cfg.td3.u_min = 0.0;
  cfg.td3.u_max = 50.0;
}

namespace {

PidGains gains_from_map(const ConfigMap& map, const std::string& section,
                        const PidGains& fallback) {
  PidGains g;
  g.kp = map.get_double(section + ".kp", fallback.kp);
  g.ki = map.get_double(section + ".ki", fallback.ki);
  g.kd = map.get_double(section + ".kd", fallback.kd);
  g.ktau = map.get_double(section + ".ktau", fallback.ktau);
  return g;
}

std::string bool_str(bool v) { return v ? "true" : "false"; }

}  // namespace

ExperimentConfig config_from_map(const ConfigMap& map) {
  ExperimentConfig cfg;
  if (map.get_bool("experiment.constrained", false)) apply_constrained_protocol(cfg);

  cfg.mode = map.get_string("experiment.mode", cfg.mode);
  cfg.start_level = map.get_double("experiment.start_level", cfg.start_level);
  cfg.train_targets = map.get_doubles("experiment.train_setpoints", cfg.train_targets);

  {
    std::vector<double> levels, durations;
    for (const auto& [lv, du] : cfg.eval_sequence) {
      levels.push_back(lv);
      durations.push_back(du);
    }
    levels = map.get_doubles("experiment.eval_setpoints", levels);
    durations = map.get_doubles("experiment.eval_durations", durations);
    if (durations.size() == 1) durations.assign(levels.size(), durations[0]);
    if (durations.size() != levels.size())
      throw std::runtime_error("config: eval_setpoints/eval_durations size mismatch");
    cfg.eval_sequence.clear();
    for (std::size_t i = 0; i < levels.size(); ++i)
      cfg.eval_sequence.emplace_back(levels[i], durations[i]);
  }

  cfg.episode_timer = map.get_double("experiment.episode_timer", cfg.episode_timer);
  cfg.control_dt = map.get_double("experiment.control_dt", cfg.control_dt);
  cfg.integrator_dt = map.get_double("experiment.integrator_dt", cfg.integrator_dt);
  cfg.n_cycles = map.get_int("experiment.n_cycles", cfg.n_cycles);
  cfg.safe_threshold = map.get_double("experiment.safe_threshold", cfg.safe_threshold);
  cfg.eval_u_min = map.get_double("experiment.eval_u_min", cfg.eval_u_min);
  cfg.eval_u_max = map.get_double("experiment.eval_u_max", cfg.eval_u_max);
  cfg.calib_step = map.get_double("experiment.calib_step", cfg.calib_step);
  cfg.tc_grid = map.get_doubles("experiment.tc_grid", cfg.tc_grid);
  cfg.seed = static_cast<std::uint64_t>(map.get_double("experiment.seed",
                                                       static_cast<double>(cfg.seed)));
  cfg.out_dir = map.get_string("experiment.out_dir", cfg.out_dir);

  cfg.initial_gains = gains_from_map(map, "initial_gains", cfg.initial_gains);
  cfg.safe_gains = gains_from_map(map, "safe_gains", cfg.safe_gains);
  cfg.t_f = map.get_double("level_pid.t_f", cfg.t_f);
  cfg.flow_gains = gains_from_map(map, "flow_pid", cfg.flow_gains);
  cfg.flow_t_f = map.get_double("flow_pid.t_f", cfg.flow_t_f);

  if (map.has("reward.name")) cfg.reward = reward_spec_from_name(map.get_string("reward.name", "eq17"));
  cfg.reward.lambda = map.get_double("reward.lambda", cfg.reward.lambda);
  cfg.reward.p = map.get_int("reward.p", cfg.reward.p);
  cfg.reward.q = map.get_int("reward.q", cfg.reward.q);

  cfg.td3.gamma = map.get_double("td3.gamma", cfg.td3.gamma);
  cfg.td3.rho = map.get_double("td3.rho", cfg.td3.rho);
  cfg.td3.sigma = map.get_double("td3.sigma", cfg.td3.sigma);
  cfg.td3.noise_clip = map.get_double("td3.noise_clip", cfg.td3.noise_clip);
  cfg.td3.policy_delay = map.get_int("td3.policy_delay", cfg.td3.policy_delay);
  cfg.td3.batch_size = map.get_int("td3.batch_size", cfg.td3.batch_size);
  cfg.td3.actor_lr = map.get_double("td3.actor_lr", cfg.td3.actor_lr);
  cfg.td3.critic_lr = map.get_double("td3.critic_lr", cfg.td3.critic_lr);
  cfg.td3.updates_per_round = map.get_int("td3.updates_per_round", cfg.td3.updates_per_round);
  cfg.td3.history = map.get_int("td3.history", cfg.td3.history);
  cfg.td3.u_min = map.get_double("td3.u_min", cfg.td3.u_min);
  cfg.td3.u_max = map.get_double("td3.u_max", cfg.td3.u_max);
  cfg.td3.use_inverting_gradients =
      map.get_bool("td3.use_inverting_gradients", cfg.td3.use_inverting_gradients);
  cfg.td3.replay_capacity = static_cast<std::size_t>(
      map.get_double("td3.replay_capacity", static_cast<double>(cfg.td3.replay_capacity)));
  cfg.td3.gru_hidden = map.get_int("td3.gru_hidden", cfg.td3.gru_hidden);
  {
    std::vector<double> hidden(cfg.td3.head_hidden.begin(), cfg.td3.head_hidden.end());
    hidden = map.get_doubles("td3.head_hidden", hidden);
    cfg.td3.head_hidden.assign(hidden.begin(), hidden.end());
  }

  cfg.plant.r_tank = map.get_double("plant.r_tank", cfg.plant.r_tank);
  cfg.plant.r_pipe = map.get_double("plant.r_pipe", cfg.plant.r_pipe);
  cfg.plant.f_c = map.get_double("plant.f_c", cfg.plant.f_c);
  cfg.plant.f_max = map.get_double("plant.f_max", cfg.plant.f_max);
  cfg.plant.tau_p = map.get_double("plant.tau_p", cfg.plant.tau_p);
  cfg.plant.tau_in = map.get_double("plant.tau_in", cfg.plant.tau_in);
  cfg.plant.tau_out = map.get_double("plant.tau_out", cfg.plant.tau_out);
  cfg.plant.tau_m = map.get_double("plant.tau_m", cfg.plant.tau_m);
  cfg.plant.g = map.get_double("plant.g", cfg.plant.g);
  cfg.plant.transport_delay =
      map.get_double("plant.transport_delay", cfg.plant.transport_delay);
  cfg.plant.outflow_scale = map.get_double("plant.outflow_scale", cfg.plant.outflow_scale);

  validate(cfg.plant);
  validate(cfg.td3);
  return cfg;
}

ExperimentConfig config_from_file(const std::string& path) {
  return config_from_map(ConfigMap::from_file(path));
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  auto d = [](double v) { return format_double(v); };
  auto list = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += format_double(v[i]);
    }
    return s;
  };

  out << "[experiment]\n";
  out << "mode = " << cfg.mode << "\n";
  out << "start_level = " << d(cfg.start_level) << "\n";
  out << "train_setpoints = " << list(cfg.train_targets) << "\n";
  {
    std::vector<double> levels, durations;
    for (const auto& [lv, du] : cfg.eval_sequence) {
      levels.push_back(lv);
      durations.push_back(du);
    }
    out << "eval_setpoints = " << list(levels) << "\n";
    out << "eval_durations = " << list(durations) << "\n";
  }
  out << "episode_timer = " << d(cfg.episode_timer) << "\n";
  out << "control_dt = " << d(cfg.control_dt) << "\n";
  out << "integrator_dt = " << d(cfg.integrator_dt) << "\n";
  out << "n_cycles = " << cfg.n_cycles << "\n";
  out << "safe_threshold = " << d(cfg.safe_threshold) << "\n";
  out << "eval_u_min = " << d(cfg.eval_u_min) << "\n";
  out << "eval_u_max = " << d(cfg.eval_u_max) << "\n";
  out << "calib_step = " << d(cfg.calib_step) << "\n";
  out << "tc_grid = " << list(cfg.tc_grid) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "out_dir = " << cfg.out_dir << "\n";
  out << "constrained = " << bool_str(cfg.constrained) << "\n";

  auto gains = [&](const char* name, const PidGains& g) {
    out << "\n[" << name << "]\n";
    out << "kp = " << d(g.kp) << "\n";
    out << "ki = " << d(g.ki) << "\n";
    out << "kd = " << d(g.kd) << "\n";
    out << "ktau = " << d(g.ktau) << "\n";
  };
  gains("initial_gains", cfg.initial_gains);
  gains("safe_gains", cfg.safe_gains);

  out << "\n[level_pid]\n";
  out << "t_f = " << d(cfg.t_f) << "\n";

  out << "\n[flow_pid]\n";
  out << "kp = " << d(cfg.flow_gains.kp) << "\n";
  out << "ki = " << d(cfg.flow_gains.ki) << "\n";
  out << "kd = " << d(cfg.flow_gains.kd) << "\n";
  out << "ktau = " << d(cfg.flow_gains.ktau) << "\n";
  out << "t_f = " << d(cfg.flow_t_f) << "\n";

  out << "\n[reward]\n";
  out << "name = " << reward_name(cfg.reward) << "\n";
  out << "lambda = " << d(cfg.reward.lambda) << "\n";
  out << "p = " << cfg.reward.p << "\n";
  out << "q = " << cfg.reward.q << "\n";

  out << "\n[td3]\n";
  out << "gamma = " << d(cfg.td3.gamma) << "\n";
  out << "rho = " << d(cfg.td3.rho) << "\n";
  out << "sigma = " << d(cfg.td3.sigma) << "\n";
  out << "noise_clip = " << d(cfg.td3.noise_clip) << "\n";
  out << "policy_delay = " << cfg.td3.policy_delay << "\n";
  out << "batch_size = " << cfg.td3.batch_size << "\n";
  out << "actor_lr = " << d(cfg.td3.actor_lr) << "\n";
  out << "critic_lr = " << d(cfg.td3.critic_lr) << "\n";
  out << "updates_per_round = " << cfg.td3.updates_per_round << "\n";
  out << "history = " << cfg.td3.history << "\n";
  out << "u_min = " << d(cfg.td3.u_min) << "\n";
  out << "u_max = " << d(cfg.td3.u_max) << "\n";
  out << "use_inverting_gradients = " << bool_str(cfg.td3.use_inverting_gradients) << "\n";
  out << "replay_capacity = " << cfg.td3.replay_capacity << "\n";
  out << "gru_hidden = " << cfg.td3.gru_hidden << "\n";
  {
    std::vector<double> hidden(cfg.td3.head_hidden.begin(), cfg.td3.head_hidden.end());
    out << "head_hidden = " << list(hidden) << "\n";
  }

  out << "\n[plant]\n";
  out << "r_tank = " << d(cfg.plant.r_tank) << "\n";
  out << "r_pipe = " << d(cfg.plant.r_pipe) << "\n";
  out << "f_c = " << d(cfg.plant.f_c) << "\n";
  out << "f_max = " << d(cfg.plant.f_max) << "\n";
  out << "tau_p = " << d(cfg.plant.tau_p) << "\n";
  out << "tau_in = " << d(cfg.plant.tau_in) << "\n";
  out << "tau_out = " << d(cfg.plant.tau_out) << "\n";
  out << "tau_m = " << d(cfg.plant.tau_m) << "\n";
  out << "g = " << d(cfg.plant.g) << "\n";
  out << "transport_delay = " << d(cfg.plant.transport_delay) << "\n";
  out << "outflow_scale = " << d(cfg.plant.outflow_scale) << "\n";
  return out.str();
}

namespace {

struct SegmentData {
  std::vector<double> times, y, u;
};

void push_row(SegmentData& seg, const ProcessRow& row) {
  seg.times.push_back(row.t);
  seg.y.push_back(row.level);
  seg.u.push_back(row.u);
}

StepMetrics average_metrics(const std::vector<StepMetrics>& steps) {
  StepMetrics avg;
  if (steps.empty()) return avg;
  const double n = static_cast<double>(steps.size());
  bool all_settled = true, all_tvu = true;
  for (const StepMetrics& m : steps) {
    avg.iae += m.iae / n;
    avg.ise += m.ise / n;
    avg.tv += m.tv / n;
    avg.tv_u += m.tv_u / n;
    avg.percent_os += m.percent_os / n;
    avg.settling_time += m.settling_time / n;
    avg.iae_raw += m.iae_raw / n;
    avg.ise_raw += m.ise_raw / n;
    avg.tv_raw += m.tv_raw / n;
    avg.tv_u_raw += m.tv_u_raw / n;
    avg.os_raw += m.os_raw / n;
    avg.epsilon += m.epsilon / n;
    all_settled = all_settled && m.settled;
    all_tvu = all_tvu && m.tv_u_defined;
  }
  avg.settled = all_settled;
  avg.tv_u_defined = all_tvu;
  return avg;
}

std::string episode_file(const std::string& dir, int episode_id) {
  char name[32];
  std::snprintf(name, sizeof(name), "ep_%04d.csv", episode_id);
  return (fs::path(dir) / name).string();
}

}  // namespace

TrainingReport run_training_experiment(const ExperimentConfig& cfg) {
  validate(cfg.plant);
  Td3Config td3 = cfg.td3;
  td3.control_dt = cfg.control_dt;
  td3.obs_t_f = cfg.t_f;
  validate(td3);

  const std::string process_dir = (fs::path(cfg.out_dir) / "process").string();
  fs::create_directories(process_dir);

  const double f0 = steady_flow_for_level(cfg.start_level, cfg.plant);
  PlantState state = steady_state_for_flow(f0, cfg.plant, cfg.integrator_dt);
  FlowLoop flow;
  flow.gains = cfg.flow_gains;
  flow.state = make_pid_state(cfg.flow_t_f, cfg.integrator_dt, state.p);
  PidState level_state = make_pid_state(cfg.t_f, cfg.control_dt, f0);

  Td3Trainer trainer(td3, cfg.initial_gains, cfg.seed);
  PidGains gains = cfg.initial_gains;

  TrainingReport report;
  report.out_dir = cfg.out_dir;
  report.episodes_per_cycle = static_cast<int>(cfg.train_targets.size());

  const std::string gains_file = (fs::path(cfg.out_dir) / "pid_params.csv").string();
  std::vector<GainsRecord> gains_history{{0.0, gains}};
  write_gains_csv(gains_file, gains_history);

  double t = 0.0;
  double prev_sp = cfg.start_level;
  int episode_id = 0;
  const int steps_per_episode =
      static_cast<int>(std::llround(cfg.episode_timer / cfg.control_dt));
  const int fallback_cap = 6 * steps_per_episode;

  for (int cycle = 1; cycle <= cfg.n_cycles; ++cycle) {
    for (double target : cfg.train_targets) {
      ++episode_id;
      EpisodeStats stats;
      stats.episode_id = episode_id;
      stats.cycle = cycle;
      stats.setpoint = target;
      stats.gains_used = gains;

      reset_primed(level_state, level_state.u_prev, prev_sp, state.measured_level);
      std::vector<ProcessRow> rows;
      SegmentData seg;
      for (int k = 0; k < steps_per_episode; ++k) {
        const LoopRecord rec =
            closed_loop_step(state, target, gains, level_state, flow, cfg.plant,
                             td3.u_min, td3.u_max, cfg.control_dt, cfg.integrator_dt);
        ProcessRow row{t,        rec.level_sp, rec.level, rec.flow_sp, rec.flow,
                       rec.pump_pct, rec.u_hat,   rec.u,     episode_id};
        rows.push_back(row);
        push_row(seg, row);
        t += cfg.control_dt;
      }
      const StepMetrics metrics =
          step_metrics(seg.times, seg.y, seg.u, prev_sp, target);
      stats.iae = metrics.iae;
      stats.ise = metrics.ise;

      // Safe-parameter fallback at timer expiry.
      if (std::abs(target - state.measured_level) > cfg.safe_threshold) {
        stats.fallback = true;
        reset_primed(level_state, level_state.u_prev, target, state.measured_level);
        for (int k = 0; k < fallback_cap; ++k) {
          const LoopRecord rec = closed_loop_step(
              state, target, cfg.safe_gains, level_state, flow, cfg.plant,
              td3.u_min, td3.u_max, cfg.control_dt, cfg.integrator_dt);
          rows.push_back(ProcessRow{t, rec.level_sp, rec.level, rec.flow_sp,
                                    rec.flow, rec.pump_pct, rec.u_hat, rec.u,
                                    episode_id});
          t += cfg.control_dt;
          if (std::abs(target - state.measured_level) <= cfg.safe_threshold) {
            stats.fallback_recovered = true;
            break;
          }
        }
      }

      const std::string path = episode_file(process_dir, episode_id);
      write_process_csv(path, rows);
      trainer.ingest_file(path, cfg.reward);
      const TrainRoundStats round = trainer.train_round();
      stats.critic_loss = round.critic_loss;
      if (round.aborted) {
        stats.flagged = true;  // keep controlling with the last good gains
      } else {
        gains_history.push_back({t, trainer.gains()});
        write_gains_csv(gains_file, gains_history);
        gains = read_gains_csv(gains_file).gains;
      }
      stats.gains_after = gains;
      report.episodes.push_back(stats);
      prev_sp = target;
    }
  }

  report.final_gains = gains;
  for (int cycle = 1; cycle <= cfg.n_cycles; ++cycle) {
    double sum = 0.0;
    int count = 0;
    for (const EpisodeStats& e : report.episodes) {
      if (e.cycle != cycle) continue;
      sum += e.iae;
      ++count;
    }
    report.cycle_iae.push_back(count > 0 ? sum / count : 0.0);
  }

  trainer.save_checkpoint((fs::path(cfg.out_dir) / "checkpoint.txt").string());
  save_training_log((fs::path(cfg.out_dir) / "training_log.csv").string(), report);
  save_gains_trajectory((fs::path(cfg.out_dir) / "gains_trajectory.csv").string(),
                        report);
  return report;
}

EvalReport run_evaluation(const PidGains& gains, const ExperimentConfig& cfg,
                          const FopdtModel* model) {
  validate(cfg.plant);
  const double f0 = steady_flow_for_level(cfg.start_level, cfg.plant);
  PlantState state = steady_state_for_flow(f0, cfg.plant, cfg.integrator_dt);
  if (std::abs(state.measured_level - cfg.start_level) > 0.05)
    throw std::runtime_error("evaluation: simulator not settled at the start level");
  FlowLoop flow;
  flow.gains = cfg.flow_gains;
  flow.state = make_pid_state(cfg.flow_t_f, cfg.integrator_dt, state.p);
  PidState level_state = make_pid_state(cfg.t_f, cfg.control_dt, f0);

  EvalReport report;
  double t = 0.0;
  double prev_sp = cfg.start_level;
  int segment = 0;
  for (const auto& [sp, duration] : cfg.eval_sequence) {
    ++segment;
    reset_primed(level_state, level_state.u_prev, prev_sp, state.measured_level);
    SegmentData seg;
    const int steps = static_cast<int>(std::llround(duration / cfg.control_dt));
    for (int k = 0; k < steps; ++k) {
      const LoopRecord rec =
          closed_loop_step(state, sp, gains, level_state, flow, cfg.plant,
                           cfg.eval_u_min, cfg.eval_u_max, cfg.control_dt,
                           cfg.integrator_dt);
      ProcessRow row{t,        rec.level_sp, rec.level, rec.flow_sp, rec.flow,
                     rec.pump_pct, rec.u_hat,   rec.u,     segment};
      report.rows.push_back(row);
      seg.times.push_back(row.t);
      seg.y.push_back(row.level);
      seg.u.push_back(row.u);
      t += cfg.control_dt;
    }
    StepMetrics m = step_metrics(seg.times, seg.y, seg.u, prev_sp, sp);
    report.steps.push_back(m);
    prev_sp = sp;
  }
  report.average = average_metrics(report.steps);
  const FopdtModel ms_model = model ? *model : reference_model();
  report.ms = max_sensitivity(gains, ms_model, cfg.t_f).ms;
  report.average.ms = report.ms;
  for (StepMetrics& m : report.steps) m.ms = report.ms;
  return report;
}

RobustnessReport run_robustness_suite(const PidGains& gains,
                                      const ExperimentConfig& cfg,
                                      const FopdtModel* model) {
  RobustnessReport report;
  report.nominal = run_evaluation(gains, cfg, model);

  ExperimentConfig outflow_cfg = cfg;
  outflow_cfg.plant.outflow_scale = 0.5;
  report.outflow_half = run_evaluation(gains, outflow_cfg, model);

  ExperimentConfig detuned_cfg = cfg;
  detuned_cfg.flow_gains.kp *= 0.5;
  report.flow_detuned = run_evaluation(gains, detuned_cfg, model);

  const std::vector<const StepMetrics*> runs{
      &report.nominal.average, &report.outflow_half.average,
      &report.flow_detuned.average};
  auto agg = [&](auto field) {
    double mean = 0.0;
    for (const StepMetrics* m : runs) mean += (*m).*field;
    mean /= static_cast<double>(runs.size());
    double var = 0.0;
    for (const StepMetrics* m : runs) {
      const double dev = (*m).*field - mean;
      var += dev * dev;
    }
    var /= static_cast<double>(runs.size() - 1);
    return std::pair<double, double>{mean, std::sqrt(var)};
  };
  auto assign = [&](auto field) {
    const auto [mean, sd] = agg(field);
    report.mean.*field = mean;
    report.stddev.*field = sd;
  };
  assign(&StepMetrics::iae);
  assign(&StepMetrics::ise);
  assign(&StepMetrics::tv);
  assign(&StepMetrics::tv_u);
  assign(&StepMetrics::percent_os);
  assign(&StepMetrics::settling_time);
  report.mean.ms = report.nominal.ms;
  report.stddev.ms = 0.0;
  return report;
}

namespace {

const char* kMetricsHeader =
    "step,iae,ise,tv,tv_u,percent_os,settling_time,settled,ms,"
    "iae_raw,ise_raw,tv_raw,tv_u_raw,os_raw,epsilon";

void metrics_row(std::ostringstream& out, const std::string& label,
                 const StepMetrics& m) {
  out << label << ',' << format_double(m.iae) << ',' << format_double(m.ise) << ','
      << format_double(m.tv) << ',' << format_double(m.tv_u) << ','
      << format_double(m.percent_os) << ',' << format_double(m.settling_time) << ','
      << (m.settled ? 1 : 0) << ',' << format_double(m.ms) << ','
      << format_double(m.iae_raw) << ',' << format_double(m.ise_raw) << ','
      << format_double(m.tv_raw) << ',' << format_double(m.tv_u_raw) << ','
      << format_double(m.os_raw) << ',' << format_double(m.epsilon) << "\n";
}

}  // namespace

void save_eval_csv(const std::string& path, const EvalReport& report) {
  std::ostringstream out;
  out << kMetricsHeader << "\n";
  for (std::size_t i = 0; i < report.steps.size(); ++i)
    metrics_row(out, std::to_string(i + 1), report.steps[i]);
  metrics_row(out, "average", report.average);
  atomic_write_text(path, out.str());
}

void save_robustness_csv(const std::string& path, const RobustnessReport& report) {
  std::ostringstream out;
  out << kMetricsHeader << "\n";
  metrics_row(out, "nominal", report.nominal.average);
  metrics_row(out, "outflow_50pct", report.outflow_half.average);
  metrics_row(out, "flow_detuned", report.flow_detuned.average);
  metrics_row(out, "mean", report.mean);
  metrics_row(out, "stddev", report.stddev);
  atomic_write_text(path, out.str());
}

void save_training_log(const std::string& path, const TrainingReport& report) {
  std::ostringstream out;
  out << "episode,cycle,setpoint,iae,ise,critic_loss,fallback,recovered,flagged,"
         "kp,ki,kd,ktau\n";
  for (const EpisodeStats& e : report.episodes) {
    out << e.episode_id << ',' << e.cycle << ',' << format_double(e.setpoint) << ','
        << format_double(e.iae) << ',' << format_double(e.ise) << ','
        << format_double(e.critic_loss) << ',' << (e.fallback ? 1 : 0) << ','
        << (e.fallback_recovered ? 1 : 0) << ',' << (e.flagged ? 1 : 0) << ','
        << format_double(e.gains_after.kp) << ',' << format_double(e.gains_after.ki)
        << ',' << format_double(e.gains_after.kd) << ','
        << format_double(e.gains_after.ktau) << "\n";
  }
  atomic_write_text(path, out.str());
}

void save_gains_trajectory(const std::string& path, const TrainingReport& report) {
  std::ostringstream out;
  out << "episode,kp,ki,kd,ktau\n";
  if (!report.episodes.empty()) {
    const PidGains& g0 = report.episodes.front().gains_used;
    out << "0," << format_double(g0.kp) << ',' << format_double(g0.ki) << ','
        << format_double(g0.kd) << ',' << format_double(g0.ktau) << "\n";
  }
  for (const EpisodeStats& e : report.episodes) {
    out << e.episode_id << ',' << format_double(e.gains_after.kp) << ','
        << format_double(e.gains_after.ki) << ',' << format_double(e.gains_after.kd)
        << ',' << format_double(e.gains_after.ktau) << "\n";
  }
  atomic_write_text(path, out.str());
}

Heatmap level_heatmap(const std::vector<ProcessRow>& rows, int episodes_per_cycle,
                      double bin_width) {
  if (episodes_per_cycle < 1)
    throw std::invalid_argument("heatmap: episodes_per_cycle must be >= 1");
  Heatmap map;
  map.bin_width = bin_width;
  if (rows.empty()) return map;

  double lo = rows.front().level, hi = rows.front().level;
  int max_episode = 0;
  for (const ProcessRow& r : rows) {
    lo = std::min(lo, r.level);
    hi = std::max(hi, r.level);
    max_episode = std::max(max_episode, r.episode_id);
  }
  map.lo = std::floor(lo / bin_width) * bin_width;
  map.hi = std::ceil(hi / bin_width) * bin_width;
  if (map.hi <= map.lo) map.hi = map.lo + bin_width;
  const int bins = static_cast<int>(std::llround((map.hi - map.lo) / bin_width));
  const int cycles = (max_episode + episodes_per_cycle - 1) / episodes_per_cycle;
  map.counts.assign(cycles, std::vector<long>(bins, 0));
  for (const ProcessRow& r : rows) {
    const int cycle = (r.episode_id - 1) / episodes_per_cycle;
    if (cycle < 0 || cycle >= cycles) continue;
    int bin = static_cast<int>((r.level - map.lo) / bin_width);
    bin = std::clamp(bin, 0, bins - 1);
    ++map.counts[cycle][bin];
  }
  return map;
}

std::vector<std::string> emit_report(const ExperimentConfig& cfg) {
  std::vector<std::string> warnings;
  const fs::path out_dir(cfg.out_dir);
  const fs::path process_dir = out_dir / "process";

  std::vector<ProcessRow> all_rows;
  if (fs::exists(process_dir)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(process_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv")
        files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const std::string& f : files) {
      const auto rows = read_process_csv(f);
      all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    }
  }
  if (all_rows.empty())
    warnings.push_back("no process data under " + process_dir.string());

  write_process_csv((out_dir / "timeseries.csv").string(), all_rows);

  {
    const int per_cycle =
        static_cast<int>(std::max<std::size_t>(cfg.train_targets.size(), 1));
    const Heatmap map = level_heatmap(all_rows, per_cycle);
    std::ostringstream out;
    out << "cycle";
    const int bins = map.counts.empty() ? 0 : static_cast<int>(map.counts[0].size());
    for (int b = 0; b < bins; ++b)
      out << ',' << format_double(map.lo + (b + 0.5) * map.bin_width);
    out << "\n";
    for (std::size_t c = 0; c < map.counts.size(); ++c) {
      out << (c + 1);
      for (long v : map.counts[c]) out << ',' << v;
      out << "\n";
    }
    atomic_write_text((out_dir / "heatmap.csv").string(), out.str());
  }

  for (const char* artifact : {"training_log.csv", "gains_trajectory.csv"}) {
    if (!fs::exists(out_dir / artifact))
      warnings.push_back(std::string(artifact) + " not found; skipped");
  }
  return warnings;
}

}  // namespace tanktune
