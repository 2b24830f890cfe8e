#include "urasim/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace urasim {

namespace {

// Reserved stream id for the shared dictionary, far above per-trial ids.
constexpr std::uint64_t kDictionaryStream = 0xD1C7ULL << 32;

}  // namespace

ScenarioContext make_context(const SystemConfig& config) {
  ValidatedConfig vc = validate(config);
  if (vc.base.n_out == 0)
    throw DimensionError("scenario requires an outer code (n_out > 0)");
  Dictionary dict = Dictionary::build(vc.base.dict_kind, vc.base.T, vc.N,
                                      RngStream(vc.base.seed, kDictionaryStream));
  LdpcCode code = LdpcCode::build_regular(vc.base.n_out, vc.base.B, vc.base.seed,
                                          vc.base.ldpc_bp_iters);
  return ScenarioContext{std::move(vc), std::move(dict), std::move(code)};
}

namespace {

std::vector<BitVec> draw_messages(const ValidatedConfig& config, RngStream& rng) {
  const std::size_t K = config.base.K_active, B = config.base.B;
  std::vector<BitVec> messages;
  std::set<BitVec> seen;
  messages.reserve(K);
  while (messages.size() < K) {
    BitVec w(B);
    for (std::size_t j = 0; j < B; ++j) w[j] = static_cast<std::uint8_t>(rng.next_u64() & 1);
    if (!config.base.allow_collisions && !seen.insert(w).second) continue;
    messages.push_back(std::move(w));
  }
  return messages;
}

SupportMatrix encode_all(const ScenarioContext& ctx, const std::vector<BitVec>& messages) {
  const std::size_t L = ctx.config.base.L, m = ctx.config.m;
  SupportMatrix C;
  C.columns.reserve(messages.size());
  for (const BitVec& w : messages) {
    BitVec codeword = ctx.code.encode(w);
    codeword.resize(L * m, 0);
    C.columns.push_back(encode_sections(codeword, L, m));
  }
  return C;
}

}  // namespace

TrialRecord run_trial(const ScenarioContext& ctx, std::size_t trial_id) {
  TrialRecord rec;
  rec.trial_id = trial_id;

  // One stream per trial, consumed in a fixed order: messages, channels,
  // noise, then whatever the receiver draws.
  RngStream rng(ctx.config.base.seed, trial_id);
  const std::vector<BitVec> messages = draw_messages(ctx.config, rng);
  const SupportMatrix C = encode_all(ctx, messages);
  const ComplexMatrix H = draw_channels(ctx.config.base.K_active, ctx.config.base.M, rng);

  try {
    Observation obs = synthesize(ctx.dictionary, C, H, ctx.config.base.sigma2,
                                 ctx.config.base.P, rng);
    obs.truth_messages = messages;

    const ReceiverResult rx = run_receiver(obs.Y, ctx.dictionary, ctx.code, ctx.config, rng);
    rec.turbo_rounds = rx.turbo_rounds;
    rec.detector_iterations = rx.detector_iterations_total;
    rec.section_mass_violations = rx.section_mass_violations;
    rec.variance_violations = rx.variance_violations;
    if (!rx.abort_reason.empty()) {
      rec.diverged = true;
      rec.pupe = 1.0;  // divergence scored as total error
      rec.missed = messages.size();
      return rec;
    }
    rec.missed = missed_messages(messages, rx.decoded);
    rec.pupe = pupe(messages, rx.decoded);
    rec.false_alarm_count = false_alarms(messages, rx.decoded);
  } catch (const NumericalError&) {
    rec.diverged = true;
    rec.pupe = 1.0;
    rec.missed = messages.size();
  }
  return rec;
}

TrialRecord run_trial(const SystemConfig& config, std::size_t trial_id) {
  return run_trial(make_context(config), trial_id);
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::eb_n0_db: return "eb_n0_db";
    case SweepAxis::M: return "M";
    case SweepAxis::K: return "K";
  }
  return "?";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "eb_n0_db") return SweepAxis::eb_n0_db;
  if (s == "M") return SweepAxis::M;
  if (s == "K") return SweepAxis::K;
  throw DimensionError("unknown sweep axis: " + s);
}

namespace {

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("URASIM_WORKERS")) {
    const long v = std::atol(env);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

SystemConfig config_at(const SweepSpec& spec, double value) {
  SystemConfig cfg = spec.base;
  switch (spec.axis) {
    case SweepAxis::eb_n0_db:
      set_power_from_eb_n0_db(cfg, value);
      break;
    case SweepAxis::M:
      cfg.M = static_cast<std::size_t>(value);
      break;
    case SweepAxis::K:
      cfg.K_active = static_cast<std::size_t>(value);
      break;
  }
  if (spec.trials > 0) cfg.trials = spec.trials;
  return cfg;
}

SweepPoint aggregate(const SweepSpec& spec, double value, const ValidatedConfig& vc,
                     const std::vector<TrialRecord>& records, double wall_time_s) {
  SweepPoint pt;
  pt.scenario_id = spec.scenario_id;
  pt.axis_name = to_string(spec.axis);
  pt.axis_value = value;
  pt.eb_n0_db = eb_n0_db(vc);
  pt.K = vc.base.K_active;
  pt.M = vc.base.M;
  pt.T = vc.base.T;
  pt.L = vc.base.L;
  pt.Q = vc.base.Q;
  pt.n_out = vc.base.n_out;
  pt.trials = records.size();

  double pupe_sum = 0.0, fa_sum = 0.0, rounds_sum = 0.0, iters_sum = 0.0;
  std::size_t missed_total = 0;
  for (const TrialRecord& r : records) {
    pupe_sum += r.pupe;
    fa_sum += static_cast<double>(r.false_alarm_count);
    rounds_sum += static_cast<double>(r.turbo_rounds);
    iters_sum += static_cast<double>(r.detector_iterations);
    missed_total += r.missed;
    if (r.diverged) ++pt.diverged_trials;
  }
  const double n_trials = static_cast<double>(records.size());
  pt.pupe_mean = pupe_sum / n_trials;
  pt.false_alarm_mean = fa_sum / n_trials;
  pt.rounds_mean = rounds_sum / n_trials;
  pt.detector_iters_mean = iters_sum / n_trials;

  // Normal-approximation half-width over per-user error indicators.
  const double n_users = n_trials * static_cast<double>(vc.base.K_active);
  const double p_hat = static_cast<double>(missed_total) / n_users;
  pt.pupe_ci95 = 1.96 * std::sqrt(std::max(p_hat * (1.0 - p_hat), 0.0) / n_users);
  pt.wall_time_s = wall_time_s;
  return pt;
}

std::vector<TrialRecord> run_point(const ScenarioContext& ctx, std::size_t trials,
                                   std::size_t workers) {
  std::vector<TrialRecord> records(trials);
  if (workers <= 1) {
    for (std::size_t t = 0; t < trials; ++t) records[t] = run_trial(ctx, t);
    return records;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t t = next.fetch_add(1);
        if (t >= trials) return;
        records[t] = run_trial(ctx, t);
      }
    });
  for (std::thread& th : pool) th.join();
  return records;
}

void append_csv_row(std::string& out, const SweepPoint& p) {
  char buf[640];
  // %.17g keeps doubles bit-exact through a parse/serialize cycle.
  std::snprintf(buf, sizeof(buf),
                "%s,%s,%.17g,%.17g,%zu,%zu,%zu,%zu,%zu,%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,"
                "%zu,%.3f\n",
                p.scenario_id.c_str(), p.axis_name.c_str(), p.axis_value, p.eb_n0_db, p.K, p.M,
                p.T, p.L, p.Q, p.n_out, p.trials, p.pupe_mean, p.pupe_ci95, p.false_alarm_mean,
                p.rounds_mean, p.detector_iters_mean, p.diverged_trials, p.wall_time_s);
  out += buf;
}

constexpr const char* kCsvHeader =
    "scenario_id,axis_name,axis_value,eb_n0_db,K,M,T,L,Q,n_out,trials,pupe_mean,pupe_ci95,"
    "false_alarm_mean,rounds_mean,detector_iters_mean,diverged_trials,wall_time_s\n";

}  // namespace

std::string sweep_csv_text(const SweepResult& result) {
  std::string out = kCsvHeader;
  for (const SweepPoint& p : result.points) append_csv_row(out, p);
  return out;
}

void write_sweep_csv(const std::string& path, const SweepResult& result) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << sweep_csv_text(result);
  if (!f) throw IoError("short write: " + path);
}

SweepResult load_sweep_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError("empty CSV: " + path);
  SweepResult result;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 18) throw IoError("bad CSV row in " + path + ": " + line);
    SweepPoint p;
    std::size_t i = 0;
    p.scenario_id = fields[i++];
    p.axis_name = fields[i++];
    p.axis_value = std::stod(fields[i++]);
    p.eb_n0_db = std::stod(fields[i++]);
    p.K = std::stoull(fields[i++]);
    p.M = std::stoull(fields[i++]);
    p.T = std::stoull(fields[i++]);
    p.L = std::stoull(fields[i++]);
    p.Q = std::stoull(fields[i++]);
    p.n_out = std::stoull(fields[i++]);
    p.trials = std::stoull(fields[i++]);
    p.pupe_mean = std::stod(fields[i++]);
    p.pupe_ci95 = std::stod(fields[i++]);
    p.false_alarm_mean = std::stod(fields[i++]);
    p.rounds_mean = std::stod(fields[i++]);
    p.detector_iters_mean = std::stod(fields[i++]);
    p.diverged_trials = std::stoull(fields[i++]);
    p.wall_time_s = std::stod(fields[i++]);
    result.points.push_back(std::move(p));
  }
  return result;
}

SweepResult run_sweep(const SweepSpec& spec) {
  if (spec.values.empty()) throw DimensionError("sweep: axis value list is empty");
  const std::size_t workers = resolve_workers(spec.workers);

  SweepResult result;
  for (const double value : spec.values) {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioContext ctx = make_context(config_at(spec, value));
    const std::size_t trials = ctx.config.base.trials;
    const std::vector<TrialRecord> records = run_point(ctx, trials, workers);
    const double wall =
        spec.stable_output
            ? 0.0
            : std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.points.push_back(aggregate(spec, value, ctx.config, records, wall));
    if (!spec.out_path.empty()) write_sweep_csv(spec.out_path, result);  // flush progress
  }
  return result;
}

std::optional<double> find_required_ebn0(const SystemConfig& config, double target_pe,
                                         const std::vector<double>& grid_db,
                                         std::size_t trials, std::size_t workers) {
  if (grid_db.empty()) throw DimensionError("threshold: empty grid");
  for (std::size_t i = 1; i < grid_db.size(); ++i)
    if (grid_db[i] < grid_db[i - 1]) throw DimensionError("threshold: grid must ascend");

  SweepSpec spec;
  spec.base = config;
  spec.axis = SweepAxis::eb_n0_db;
  spec.values = grid_db;
  spec.trials = trials;
  spec.workers = workers;
  const SweepResult result = run_sweep(spec);
  for (const SweepPoint& p : result.points)
    if (p.pupe_mean <= target_pe) return p.axis_value;
  return std::nullopt;
}

}  // namespace urasim
