#pragma once

#include <cstdint>
#include <string>

#include "urasim/errors.hpp"

namespace urasim {

enum class DictionaryKind { gaussian, subsampled_dft };

std::string to_string(DictionaryKind kind);
DictionaryKind dictionary_kind_from_string(const std::string& s);

/// One simulation scenario. All powers and variances are linear; decibels
/// appear only at CLI/reporting boundaries.
struct SystemConfig {
  // Scenario dimensions.
  std::size_t K_active = 8;  ///< simultaneously active users
  std::size_t M = 8;         ///< receive antennas
  std::size_t T = 256;       ///< coherence blocklength (channel uses)
  std::size_t B = 16;        ///< message bits per user
  std::size_t L = 8;         ///< inner-code sections
  std::size_t Q = 16;        ///< section size, must be a power of two

  // Power and noise.
  double P = 1.0;       ///< per-user power budget (linear)
  double sigma2 = 1.0;  ///< noise variance (linear)

  // Iteration limits and damping.
  std::size_t t_max_bigamp = 50;
  std::size_t t_max_turbo = 12;
  double damping = 0.7;

  std::uint64_t seed = 1;
  std::size_t trials = 100;

  // Outer code: (n_out, B) with n_out <= L*log2(Q); tail positions above
  // n_out are zero-padded. n_out = 0 disables the outer code (inner-code
  // studies only; the receiver and harness require n_out > 0).
  std::size_t n_out = 32;
  std::size_t ldpc_bp_iters = 50;

  // Detector knobs.
  double tol_stop = 1e-6;
  double init_perturb = 1e-3;  ///< relative mean-init jitter; 0 = exact 1/Q
  /// Seed the channel means with draws from the CN(0,1) prior instead of
  /// zeros. Zero init keeps user slots nearly interchangeable, which
  /// makes crowded scenarios collapse onto one explanation.
  bool init_channel_prior_draw = false;

  // Receiver knobs.
  double slot_overprovision = 1.0;  ///< detector slots = ceil(this * K_current)
  bool ls_channel_refine = false;   ///< re-estimate decoded channels before SIC
  bool feedback_retry = false;      ///< one prior-feedback retry after an empty round

  // Source model.
  bool allow_collisions = false;  ///< draw user messages with replacement

  DictionaryKind dict_kind = DictionaryKind::gaussian;
};

/// SystemConfig plus derived quantities; constructed only by validate().
struct ValidatedConfig {
  SystemConfig base;
  std::size_t m = 0;          ///< bits per section, log2(Q)
  std::size_t N = 0;          ///< support length, L*Q
  double eb_n0_factor = 0.0;  ///< P*T / (B*sigma2), linear
};

/// Checks every invariant and populates the derived fields.
/// Throws DimensionError naming the violated constraint.
ValidatedConfig validate(const SystemConfig& config);

/// Idempotent overload: validating a validated config is the identity.
ValidatedConfig validate(const ValidatedConfig& config);

/// 10*log10(P*T / (B*sigma2)).
double eb_n0_db(const ValidatedConfig& config);

/// Sets P so that eb_n0_db(validate(config)) equals the requested value.
void set_power_from_eb_n0_db(SystemConfig& config, double db);

/// Loads a `key = value` scenario file ('#' starts a comment).
/// Unknown keys are rejected; missing keys keep their defaults.
SystemConfig load_config_file(const std::string& path);

/// Applies one `key=value` override (same keys as the scenario file).
void apply_config_override(SystemConfig& config, const std::string& key,
                           const std::string& value);

/// Inverse of load_config_file; used to persist resolved scenarios.
std::string config_to_text(const SystemConfig& config);

}  // namespace urasim
