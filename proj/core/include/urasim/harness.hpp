#pragma once

#include <optional>
#include <string>
#include <vector>

#include "urasim/channel.hpp"
#include "urasim/receiver.hpp"

namespace urasim {

/// Everything a trial needs that is shared across trials of a scenario:
/// the validated config, the dictionary, and the outer code.
struct ScenarioContext {
  ValidatedConfig config;
  Dictionary dictionary;
  LdpcCode code;
};

ScenarioContext make_context(const SystemConfig& config);

struct TrialRecord {
  std::size_t trial_id = 0;
  double pupe = 1.0;
  std::size_t missed = 0;
  std::size_t false_alarm_count = 0;
  std::size_t turbo_rounds = 0;
  std::size_t detector_iterations = 0;
  std::size_t section_mass_violations = 0;
  std::size_t variance_violations = 0;
  bool diverged = false;
};

/// One end-to-end trial, fully deterministic in (config.seed, trial_id).
/// A NumericalError inside the receiver marks the trial diverged and
/// scores it as total error.
TrialRecord run_trial(const ScenarioContext& ctx, std::size_t trial_id);

/// Convenience overload that builds the shared context itself.
TrialRecord run_trial(const SystemConfig& config, std::size_t trial_id);

enum class SweepAxis { eb_n0_db, M, K };

std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& s);

struct SweepSpec {
  SystemConfig base;
  SweepAxis axis = SweepAxis::eb_n0_db;
  std::vector<double> values;  ///< nonempty; M/K axes take integral values
  std::size_t trials = 0;      ///< 0 = use base.trials
  std::string out_path;        ///< empty = do not write
  std::string scenario_id = "scenario";
  std::size_t workers = 0;     ///< 0 = URASIM_WORKERS env or hardware
  bool stable_output = false;  ///< write wall_time_s as 0 for byte-stable CSVs
};

struct SweepPoint {
  std::string scenario_id;
  std::string axis_name;
  double axis_value = 0.0;
  double eb_n0_db = 0.0;
  std::size_t K = 0, M = 0, T = 0, L = 0, Q = 0, n_out = 0;
  std::size_t trials = 0;
  double pupe_mean = 0.0;
  double pupe_ci95 = 0.0;  ///< binomial half-width over per-user error indicators
  double false_alarm_mean = 0.0;
  double rounds_mean = 0.0;
  double detector_iters_mean = 0.0;
  std::size_t diverged_trials = 0;
  double wall_time_s = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
};

/// Runs every axis point over a bounded worker pool (one RNG substream
/// per trial, order-independent aggregation) and writes the CSV when
/// out_path is set. Partial results are flushed point by point.
SweepResult run_sweep(const SweepSpec& spec);

/// Smallest grid value whose measured mean PUPE is <= target_pe, or
/// nullopt when no grid point passes. The grid must be sorted ascending.
std::optional<double> find_required_ebn0(const SystemConfig& config, double target_pe,
                                         const std::vector<double>& grid_db,
                                         std::size_t trials = 0, std::size_t workers = 0);

/// CSV schema (exact header, one row per axis point):
/// scenario_id,axis_name,axis_value,eb_n0_db,K,M,T,L,Q,n_out,trials,
/// pupe_mean,pupe_ci95,false_alarm_mean,rounds_mean,detector_iters_mean,
/// diverged_trials,wall_time_s
void write_sweep_csv(const std::string& path, const SweepResult& result);
SweepResult load_sweep_csv(const std::string& path);
std::string sweep_csv_text(const SweepResult& result);

/// Fast internal consistency suite; prints one line per check.
bool selftest(std::ostream& out);

}  // namespace urasim
