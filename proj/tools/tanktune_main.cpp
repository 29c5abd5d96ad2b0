#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "tanktune/calibrate.hpp"
#include "tanktune/csv.hpp"
#include "tanktune/harness.hpp"

namespace fs = std::filesystem;
using namespace tanktune;

namespace {

PidGains parse_gains(const std::string& text) {
  std::istringstream in(text);
  std::string item;
  std::vector<double> vals;
  while (std::getline(in, item, ',')) vals.push_back(std::stod(item));
  if (vals.size() != 4)
    throw std::runtime_error("expected gains as kp,ki,kd,ktau");
  return PidGains{vals[0], vals[1], vals[2], vals[3]};
}

std::string gains_str(const PidGains& g) {
  std::ostringstream out;
  out << "kp=" << format_double(g.kp) << " ki=" << format_double(g.ki)
      << " kd=" << format_double(g.kd) << " ktau=" << format_double(g.ktau);
  return out.str();
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string reward;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool constrained = false;
};

ExperimentConfig load_config(const CommonOpts& opts) {
  ExperimentConfig cfg =
      opts.config_path.empty() ? default_config() : config_from_file(opts.config_path);
  if (opts.constrained && !cfg.constrained) apply_constrained_protocol(cfg);
  if (opts.seed_set) cfg.seed = opts.seed;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (!opts.reward.empty()) cfg.reward = reward_spec_from_name(opts.reward);
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_protocol_flags) {
  cmd->add_option("--config", opts.config_path, "Configuration file");
  cmd->add_option("--out", opts.out_dir, "Output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "RNG seed (overrides config)")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  if (with_protocol_flags) {
    cmd->add_flag("--constrained", opts.constrained,
                  "Use the input-constrained protocol (inverting gradients)");
    cmd->add_option("--reward", opts.reward, "Reward function: eq17|eq12|eqB1|eqB2")
        ->check(CLI::IsMember({"eq17", "eq12", "eqB1", "eqB2"}));
  }
}

FopdtModel calibrated_model(const ExperimentConfig& cfg) {
  return calibrate_to_fopdt(cfg.plant, cfg.calib_step, cfg.start_level,
                            cfg.control_dt, cfg.integrator_dt)
      .model;
}

int cmd_simulate(const CommonOpts& opts, const std::string& mode, double value,
                 double setpoint, double duration, const std::string& gains_text) {
  ExperimentConfig cfg = load_config(opts);
  fs::create_directories(cfg.out_dir);
  const std::string out_path = (fs::path(cfg.out_dir) / "simulate.csv").string();

  std::vector<ProcessRow> rows;
  double t = 0.0;
  const int steps = static_cast<int>(std::llround(duration / cfg.control_dt));

  if (mode == "closed") {
    const PidGains gains =
        gains_text.empty() ? cfg.initial_gains : parse_gains(gains_text);
    const double f0 = steady_flow_for_level(cfg.start_level, cfg.plant);
    PlantState state = steady_state_for_flow(f0, cfg.plant, cfg.integrator_dt);
    FlowLoop flow;
    flow.gains = cfg.flow_gains;
    flow.state = make_pid_state(cfg.flow_t_f, cfg.integrator_dt, state.p);
    PidState level_state = make_pid_state(cfg.t_f, cfg.control_dt, f0);
    reset_primed(level_state, f0, cfg.start_level, state.measured_level);
    for (int k = 0; k < steps; ++k) {
      const LoopRecord rec =
          closed_loop_step(state, setpoint, gains, level_state, flow, cfg.plant,
                           cfg.eval_u_min, cfg.eval_u_max, cfg.control_dt,
                           cfg.integrator_dt);
      rows.push_back(ProcessRow{t, rec.level_sp, rec.level, rec.flow_sp, rec.flow,
                                rec.pump_pct, rec.u_hat, rec.u, 1});
      t += cfg.control_dt;
    }
  } else if (mode == "flow") {
    PlantState state = steady_state_for_flow(value, cfg.plant, cfg.integrator_dt);
    FlowLoop flow;
    flow.gains = cfg.flow_gains;
    flow.state = make_pid_state(cfg.flow_t_f, cfg.integrator_dt, state.p);
    for (int k = 0; k < steps; ++k) {
      const FlowIntervalLog log = advance_flow_interval(
          state, value, flow, cfg.plant, cfg.control_dt, cfg.integrator_dt);
      rows.push_back(ProcessRow{t, 0.0, state.measured_level, log.flow_sp_eff,
                                state.f_in, log.pump_cmd, value, value, 1});
      t += cfg.control_dt;
    }
  } else if (mode == "pump") {
    PlantState state = steady_state_for_pump(value, cfg.plant);
    for (int k = 0; k < steps; ++k) {
      advance_pump_interval(state, value, cfg.plant, cfg.control_dt,
                            cfg.integrator_dt);
      rows.push_back(ProcessRow{t, 0.0, state.measured_level, 0.0, state.f_in,
                                state.p, value, value, 1});
      t += cfg.control_dt;
    }
  } else {
    std::cerr << "unknown simulate mode: " << mode << "\n";
    return 1;
  }
  write_process_csv(out_path, rows);
  std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, double init_kp) {
  ExperimentConfig cfg = load_config(opts);
  if (init_kp > 0.0) cfg.initial_gains = init_gains_for_kp(init_kp);
  const TrainingReport report = run_training_experiment(cfg);
  std::cout << "episodes: " << report.episodes.size() << "\n";
  if (!report.cycle_iae.empty()) {
    std::cout << "first-cycle IAE: " << format_double(report.cycle_iae.front())
              << "  last-cycle IAE: " << format_double(report.cycle_iae.back()) << "\n";
  }
  std::cout << "final gains: " << gains_str(report.final_gains) << "\n";
  std::cout << "artifacts in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& gains_text,
                 const std::string& gains_file, bool fit_model) {
  ExperimentConfig cfg = load_config(opts);
  PidGains gains = cfg.initial_gains;
  if (!gains_text.empty())
    gains = parse_gains(gains_text);
  else if (!gains_file.empty())
    gains = read_gains_csv(gains_file).gains;
  FopdtModel model = reference_model();
  if (fit_model) model = calibrated_model(cfg);
  const EvalReport report = run_evaluation(gains, cfg, &model);
  fs::create_directories(cfg.out_dir);
  const std::string path = (fs::path(cfg.out_dir) / "evaluation.csv").string();
  save_eval_csv(path, report);
  write_process_csv((fs::path(cfg.out_dir) / "evaluation_timeseries.csv").string(),
                    report.rows);
  std::cout << "gains: " << gains_str(gains) << "\n";
  std::cout << "normalized IAE " << format_double(report.average.iae) << ", ISE "
            << format_double(report.average.ise) << ", TV "
            << format_double(report.average.tv) << ", TVu "
            << format_double(report.average.tv_u) << ", %OS "
            << format_double(report.average.percent_os) << ", ST "
            << format_double(report.average.settling_time) << ", Ms "
            << format_double(report.ms) << "\n";
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_baseline(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts);
  const CalibrationResult calib = calibrate_to_fopdt(
      cfg.plant, cfg.calib_step, cfg.start_level, cfg.control_dt, cfg.integrator_dt);
  std::cout << "fitted model: k=" << format_double(calib.model.k)
            << " tau1=" << format_double(calib.model.tau1)
            << " theta_d=" << format_double(calib.model.theta_d) << "\n";

  std::ostringstream out;
  out << "tc,kp,ki,kd,ktau,ms\n";
  for (double tc : cfg.tc_grid) {
    const PidGains gains = simc_pi(calib.model, tc);
    const double ms = max_sensitivity(gains, calib.model, cfg.t_f).ms;
    out << format_double(tc) << ',' << format_double(gains.kp) << ','
        << format_double(gains.ki) << ',' << format_double(gains.kd) << ','
        << format_double(gains.ktau) << ',' << format_double(ms) << "\n";
    std::cout << "SIMC tc=" << format_double(tc) << ": " << gains_str(gains)
              << " Ms=" << format_double(ms) << "\n";
  }
  fs::create_directories(cfg.out_dir);
  const std::string table_path = (fs::path(cfg.out_dir) / "simc_grid.csv").string();
  atomic_write_text(table_path, out.str());

  std::ostringstream frag;
  frag << "# fitted flow-setpoint -> level model\n";
  frag << "[fopdt]\n";
  frag << "k = " << format_double(calib.model.k) << "\n";
  frag << "tau1 = " << format_double(calib.model.tau1) << "\n";
  frag << "theta_d = " << format_double(calib.model.theta_d) << "\n";
  atomic_write_text((fs::path(cfg.out_dir) / "fopdt_model.ini").string(), frag.str());
  std::cout << "wrote " << table_path << "\n";
  return 0;
}

int cmd_robustness(const CommonOpts& opts, const std::string& gains_text,
                   const std::string& gains_file, bool fit_model) {
  ExperimentConfig cfg = load_config(opts);
  PidGains gains = cfg.initial_gains;
  if (!gains_text.empty())
    gains = parse_gains(gains_text);
  else if (!gains_file.empty())
    gains = read_gains_csv(gains_file).gains;
  FopdtModel model = reference_model();
  if (fit_model) model = calibrated_model(cfg);
  const RobustnessReport report = run_robustness_suite(gains, cfg, &model);
  fs::create_directories(cfg.out_dir);
  const std::string path = (fs::path(cfg.out_dir) / "robustness.csv").string();
  save_robustness_csv(path, report);
  std::cout << "nominal IAE " << format_double(report.nominal.average.iae)
            << ", outflow-50% IAE " << format_double(report.outflow_half.average.iae)
            << ", flow-detuned IAE " << format_double(report.flow_detuned.average.iae)
            << "\n";
  std::cout << "mean IAE " << format_double(report.mean.iae) << " +- "
            << format_double(report.stddev.iae) << "\n";
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_report(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts);
  const auto warnings = emit_report(cfg);
  for (const std::string& w : warnings) std::cout << "warning: " << w << "\n";
  std::cout << "report files written under " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-tank level-control tuning testbed: simulator, RL tuner, and "
               "SIMC baselines"};
  app.require_subcommand(0, 1);

  bool dump_defaults = false;
  app.add_flag("--dump-defaults", dump_defaults,
               "Print the default configuration and exit");

  CommonOpts sim_opts;
  std::string sim_mode = "closed";
  double sim_value = 0.0, sim_setpoint = 65.0, sim_duration = 600.0;
  std::string sim_gains;
  CLI::App* sim = app.add_subcommand("simulate", "Run the plant open or closed loop");
  add_common(sim, sim_opts, false);
  sim->add_option("--mode", sim_mode, "pump | flow | closed")
      ->check(CLI::IsMember({"pump", "flow", "closed"}));
  sim->add_option("--value", sim_value, "Held pump % (pump) or flow setpoint (flow)");
  sim->add_option("--setpoint", sim_setpoint, "Level setpoint for closed mode");
  sim->add_option("--duration", sim_duration, "Simulated seconds");
  sim->add_option("--gains", sim_gains, "Level PID gains kp,ki,kd,ktau");

  CommonOpts train_opts;
  double train_init_kp = 0.0;
  CLI::App* train = app.add_subcommand("train", "Run the RL tuning experiment");
  add_common(train, train_opts, true);
  train->add_option("--init-kp", train_init_kp,
                    "Initialize gains from the kp family (ki=kp/60, kd=0.01kp)");

  CommonOpts eval_opts;
  std::string eval_gains, eval_gains_file;
  bool eval_fit = false;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score fixed gains on the "
                                                      "evaluation sequence");
  add_common(evaluate, eval_opts, false);
  evaluate->add_option("--gains", eval_gains, "Gains kp,ki,kd,ktau");
  evaluate->add_option("--gains-file", eval_gains_file, "PID parameter CSV");
  evaluate->add_flag("--fit-model", eval_fit,
                     "Identify the FOPDT model before computing Ms");

  CommonOpts base_opts;
  CLI::App* baseline = app.add_subcommand("baseline", "Fit the FOPDT model and "
                                                      "tabulate the SIMC grid");
  add_common(baseline, base_opts, false);

  CommonOpts rob_opts;
  std::string rob_gains, rob_gains_file;
  bool rob_fit = false;
  CLI::App* robustness =
      app.add_subcommand("robustness", "Nominal + perturbed evaluation suite");
  add_common(robustness, rob_opts, false);
  robustness->add_option("--gains", rob_gains, "Gains kp,ki,kd,ktau");
  robustness->add_option("--gains-file", rob_gains_file, "PID parameter CSV");
  robustness->add_flag("--fit-model", rob_fit,
                       "Identify the FOPDT model before computing Ms");

  CommonOpts report_opts;
  CLI::App* report = app.add_subcommand("report", "Aggregate experiment artifacts");
  add_common(report, report_opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (dump_defaults) {
      std::cout << dump_config(default_config());
      return 0;
    }
    if (sim->parsed())
      return cmd_simulate(sim_opts, sim_mode, sim_value, sim_setpoint, sim_duration,
                          sim_gains);
    if (train->parsed()) return cmd_train(train_opts, train_init_kp);
    if (evaluate->parsed())
      return cmd_evaluate(eval_opts, eval_gains, eval_gains_file, eval_fit);
    if (baseline->parsed()) return cmd_baseline(base_opts);
    if (robustness->parsed())
      return cmd_robustness(rob_opts, rob_gains, rob_gains_file, rob_fit);
    if (report->parsed()) return cmd_report(report_opts);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  std::cout << app.help();
  return 0;
}
