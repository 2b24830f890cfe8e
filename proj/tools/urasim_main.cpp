// Command-line front end: single runs, axis sweeps, threshold search and
// the built-in selftest. All numbers in config files are linear; decibel
// values enter only through eb_n0_db and the sweep axis.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "urasim/harness.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string out_path;
  std::size_t workers = 0;
  std::string scenario_id = "scenario";
  bool stable_output = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Scenario file (key = value lines)");
  cmd->add_option("--set", args.overrides, "Override a config key, e.g. --set damping=0.8");
  cmd->add_option("--seed", args.seed, "Override the scenario seed");
  cmd->add_option("--trials", args.trials, "Override the trial count");
  cmd->add_option("--out", args.out_path, "Output CSV path");
  cmd->add_option("--workers", args.workers,
                  "Worker threads (default: URASIM_WORKERS or hardware)");
  cmd->add_option("--scenario-id", args.scenario_id, "Scenario id written to the CSV");
  cmd->add_flag("--stable-output", args.stable_output,
                "Write wall_time_s as 0 so repeated runs produce identical bytes");
}

urasim::SystemConfig resolve_config(const CommonArgs& args) {
  urasim::SystemConfig cfg;
  if (!args.config_path.empty()) cfg = urasim::load_config_file(args.config_path);
  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw urasim::DimensionError("--set expects key=value, got: " + kv);
    urasim::apply_config_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed) cfg.seed = *args.seed;
  if (args.trials) cfg.trials = *args.trials;
  return cfg;
}

void print_points(const urasim::SweepResult& result) {
  for (const auto& p : result.points) {
    std::cout << p.axis_name << " = " << p.axis_value << "  Eb/N0 = " << p.eb_n0_db
              << " dB  PUPE = " << p.pupe_mean << " (ci95 " << p.pupe_ci95 << ")"
              << "  false alarms/trial = " << p.false_alarm_mean
              << "  rounds = " << p.rounds_mean << "  detector iters = "
              << p.detector_iters_mean << "  diverged = " << p.diverged_trials
              << (p.pupe_mean <= 0.05 ? "  [meets Pe <= 0.05]" : "") << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsourced random access link-level simulator"};
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, thr_args;
  std::string axis_name = "eb_n0_db";
  std::vector<double> values;
  std::string thr_axis_unused;
  std::vector<double> grid;
  double target_pe = 0.05;

  CLI::App* run_cmd = app.add_subcommand("run", "Monte-Carlo trials of a single scenario");
  add_common(run_cmd, run_args);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Sweep one axis over a value list");
  add_common(sweep_cmd, sweep_args);
  sweep_cmd->add_option("--axis", axis_name, "Sweep axis: eb_n0_db | M | K")->required();
  sweep_cmd->add_option("--values", values, "Axis values")->required()->expected(-1);

  CLI::App* thr_cmd =
      app.add_subcommand("threshold", "Smallest Eb/N0 grid point meeting the target PUPE");
  add_common(thr_cmd, thr_args);
  thr_cmd->add_option("--values", grid, "Ascending Eb/N0 grid (dB)")->required()->expected(-1);
  thr_cmd->add_option("--target", target_pe, "Target PUPE (default 0.05)");

  CLI::App* selftest_cmd = app.add_subcommand("selftest", "Run the internal invariant suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(selftest_cmd)) {
      return urasim::selftest(std::cout) ? 0 : 1;
    }
    if (app.got_subcommand(run_cmd)) {
      urasim::SweepSpec spec;
      spec.base = resolve_config(run_args);
      spec.axis = urasim::SweepAxis::eb_n0_db;
      spec.values = {urasim::eb_n0_db(urasim::validate(spec.base))};
      spec.out_path = run_args.out_path;
      spec.workers = run_args.workers;
      spec.scenario_id = run_args.scenario_id;
      spec.stable_output = run_args.stable_output;
      print_points(urasim::run_sweep(spec));
      return 0;
    }
    if (app.got_subcommand(sweep_cmd)) {
      urasim::SweepSpec spec;
      spec.base = resolve_config(sweep_args);
      spec.axis = urasim::sweep_axis_from_string(axis_name);
      spec.values = values;
      spec.out_path = sweep_args.out_path;
      spec.workers = sweep_args.workers;
      spec.scenario_id = sweep_args.scenario_id;
      spec.stable_output = sweep_args.stable_output;
      print_points(urasim::run_sweep(spec));
      return 0;
    }
    if (app.got_subcommand(thr_cmd)) {
      const urasim::SystemConfig cfg = resolve_config(thr_args);
      const auto found = urasim::find_required_ebn0(cfg, target_pe, grid,
                                                    thr_args.trials.value_or(0),
                                                    thr_args.workers);
      if (found)
        std::cout << "required Eb/N0: " << *found << " dB (target PUPE " << target_pe << ")\n";
      else
        std::cout << "required Eb/N0: not achieved on the given grid\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
