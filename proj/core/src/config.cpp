#include "urasim/config.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace urasim {

std::string to_string(DictionaryKind kind) {
  return kind == DictionaryKind::gaussian ? "gaussian" : "subsampled_dft";
}

DictionaryKind dictionary_kind_from_string(const std::string& s) {
  if (s == "gaussian") return DictionaryKind::gaussian;
  if (s == "subsampled_dft") return DictionaryKind::subsampled_dft;
  throw DimensionError("unknown dictionary kind: " + s);
}

ValidatedConfig validate(const SystemConfig& config) {
  const auto fail = [](const std::string& what) { throw DimensionError(what); };

  if (config.K_active < 1) fail("K_active must be >= 1");
  if (config.M < 1) fail("M must be >= 1");
  if (config.T < 1) fail("T must be >= 1");
  if (config.B < 1) fail("B must be >= 1");
  if (config.L < 1) fail("L must be >= 1");
  if (config.Q < 2 || !std::has_single_bit(config.Q))
    fail("Q must be a power of two >= 2, got " + std::to_string(config.Q));
  if (!(config.P > 0.0)) fail("P must be > 0");
  if (!(config.sigma2 > 0.0)) fail("sigma2 must be > 0");
  if (!(config.damping > 0.0 && config.damping <= 1.0)) fail("damping must be in (0, 1]");
  if (config.trials < 1) fail("trials must be >= 1");
  if (!(config.slot_overprovision >= 1.0)) fail("slot_overprovision must be >= 1");
  if (!(config.init_perturb >= 0.0)) fail("init_perturb must be >= 0");
  if (!(config.tol_stop >= 0.0)) fail("tol_stop must be >= 0");

  ValidatedConfig out;
  out.base = config;
  out.m = static_cast<std::size_t>(std::countr_zero(config.Q));
  out.N = config.L * config.Q;

  if (config.n_out > 0) {
    if (config.n_out > config.L * out.m)
      fail("outer codeword length n_out = " + std::to_string(config.n_out) +
           " exceeds section capacity L*m = " + std::to_string(config.L * out.m));
    if (config.B >= config.n_out)
      fail("message bits B = " + std::to_string(config.B) +
           " must be < outer codeword length n_out = " + std::to_string(config.n_out));
  }
  if (config.dict_kind == DictionaryKind::subsampled_dft && config.T > out.N)
    fail("subsampled_dft requires T <= N, got T = " + std::to_string(config.T) +
         ", N = " + std::to_string(out.N));

  out.eb_n0_factor = config.P * static_cast<double>(config.T) /
                     (static_cast<double>(config.B) * config.sigma2);
  return out;
}

ValidatedConfig validate(const ValidatedConfig& config) { return validate(config.base); }

double eb_n0_db(const ValidatedConfig& config) {
  return 10.0 * std::log10(config.eb_n0_factor);
}

void set_power_from_eb_n0_db(SystemConfig& config, double db) {
  const double factor = std::pow(10.0, db / 10.0);
  config.P = factor * static_cast<double>(config.B) * config.sigma2 /
             static_cast<double>(config.T);
}

namespace {

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw DimensionError("expected boolean, got: " + v);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void apply_config_override(SystemConfig& c, const std::string& key, const std::string& value) {
  const auto as_size = [&] { return static_cast<std::size_t>(std::stoull(value)); };
  const auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
  const auto as_double = [&] { return std::stod(value); };

  if (key == "K_active") c.K_active = as_size();
  else if (key == "M") c.M = as_size();
  else if (key == "T") c.T = as_size();
  else if (key == "B") c.B = as_size();
  else if (key == "L") c.L = as_size();
  else if (key == "Q") c.Q = as_size();
  else if (key == "P") c.P = as_double();
  else if (key == "sigma2") c.sigma2 = as_double();
  else if (key == "eb_n0_db") set_power_from_eb_n0_db(c, as_double());
  else if (key == "t_max_bigamp") c.t_max_bigamp = as_size();
  else if (key == "t_max_turbo") c.t_max_turbo = as_size();
  else if (key == "damping") c.damping = as_double();
  else if (key == "seed") c.seed = as_u64();
  else if (key == "trials") c.trials = as_size();
  else if (key == "n_out") c.n_out = as_size();
  else if (key == "ldpc_bp_iters") c.ldpc_bp_iters = as_size();
  else if (key == "tol_stop") c.tol_stop = as_double();
  else if (key == "init_perturb") c.init_perturb = as_double();
  else if (key == "init_channel_prior_draw") c.init_channel_prior_draw = parse_bool(value);
  else if (key == "slot_overprovision") c.slot_overprovision = as_double();
  else if (key == "ls_channel_refine") c.ls_channel_refine = parse_bool(value);
  else if (key == "feedback_retry") c.feedback_retry = parse_bool(value);
  else if (key == "allow_collisions") c.allow_collisions = parse_bool(value);
  else if (key == "dict_kind") c.dict_kind = dictionary_kind_from_string(value);
  else throw DimensionError("unknown config key: " + key);
}

SystemConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  SystemConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      apply_config_override(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return config;
}

std::string config_to_text(const SystemConfig& c) {
  std::ostringstream out;
  out << "K_active = " << c.K_active << "\n"
      << "M = " << c.M << "\n"
      << "T = " << c.T << "\n"
      << "B = " << c.B << "\n"
      << "L = " << c.L << "\n"
      << "Q = " << c.Q << "\n"
      << "P = " << c.P << "\n"
      << "sigma2 = " << c.sigma2 << "\n"
      << "t_max_bigamp = " << c.t_max_bigamp << "\n"
      << "t_max_turbo = " << c.t_max_turbo << "\n"
      << "damping = " << c.damping << "\n"
      << "seed = " << c.seed << "\n"
      << "trials = " << c.trials << "\n"
      << "n_out = " << c.n_out << "\n"
      << "ldpc_bp_iters = " << c.ldpc_bp_iters << "\n"
      << "tol_stop = " << c.tol_stop << "\n"
      << "init_perturb = " << c.init_perturb << "\n"
      << "init_channel_prior_draw = " << (c.init_channel_prior_draw ? "true" : "false") << "\n"
      << "slot_overprovision = " << c.slot_overprovision << "\n"
      << "ls_channel_refine = " << (c.ls_channel_refine ? "true" : "false") << "\n"
      << "feedback_retry = " << (c.feedback_retry ? "true" : "false") << "\n"
      << "allow_collisions = " << (c.allow_collisions ? "true" : "false") << "\n"
      << "dict_kind = " << to_string(c.dict_kind) << "\n";
  return out.str();
}

}  // namespace urasim
