#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "urasim/config.hpp"
#include "urasim/dictionary.hpp"
#include "urasim/section_posterior.hpp"

namespace urasim {

/// Numerical guards for the message-passing recursions.
inline constexpr double kVarFloor = 1e-12;
inline constexpr double kVarCap = 1e6;

/// All mean/variance planes of the bilinear message-passing detector.
///
/// Shapes: the latent product X = C H^T lives on N x M; the residual on
/// T x M (its variance is constant across t and kept per antenna); the
/// channel planes on K x M; the support planes on N x K. Support means
/// are probabilities, hence real.
struct DetectorState {
  std::size_t N = 0, M = 0, T = 0, K = 0, L = 0, Q = 0;

  ComplexMatrix mu_x;   // N x M
  RealMatrix nu_x;      // N x M
  ComplexMatrix mu_z;   // T x M residual
  std::vector<double> nu_z;  // per antenna; the recursion averages over n
  ComplexMatrix theta;  // N x M pseudo-observations
  ComplexMatrix mu_p;   // N x M plug-in product estimate
  RealMatrix nu_p;      // N x M
  ComplexMatrix mu_alpha;  // N x M scaled product residual
  RealMatrix nu_alpha;     // N x M
  ComplexMatrix mu_r;   // K x M channel pseudo-likelihood mean
  RealMatrix nu_r;      // K x M
  ComplexMatrix mu_q;   // N x K support pseudo-likelihood mean
  RealMatrix nu_q;      // N x K
  ComplexMatrix mu_h;   // K x M channel posterior mean
  RealMatrix nu_h;      // K x M
  RealMatrix mu_c;      // N x K support posterior mean (probabilities)
  RealMatrix nu_c;      // N x K

  std::size_t iter = 0;

  // Invariant audit, accumulated across the run.
  std::size_t section_mass_violations = 0;
  std::size_t variance_violations = 0;
};

struct DetectorDiagnostics {
  std::size_t iterations = 0;
  bool converged = false;
  double final_delta = 0.0;          ///< last relative change of mu_x
  double final_residual_norm = 0.0;  ///< ||mu_z||_F at exit
  std::size_t section_mass_violations = 0;
  std::size_t variance_violations = 0;
};

struct DetectorOutput {
  std::vector<SectionPosterior> posteriors;  ///< one L x Q table per user slot
  ComplexMatrix channel_mean;                ///< K x M posterior means
  RealMatrix channel_var;                    ///< K x M posterior variances
  DetectorDiagnostics diagnostics;
};

namespace bigamp {

/// Mean-field initialization: support means at 1/Q (optionally jittered to
/// break slot symmetry), channel prior moments (0, 1), residual seeded
/// with Y, product variance at its prior value K/Q.
DetectorState init(const ValidatedConfig& config, const ComplexMatrix& Y,
                   std::size_t K_current, RngStream& rng);

/// Affine sweep: pseudo-observation, product-plane posterior, residual
/// with its first-order correction. Damping applies to the mu_x and mu_z
/// means after all five quantities are formed.
void affine_half_step(DetectorState& s, const Dictionary& A, const ComplexMatrix& Y,
                      double sigma2, double damping);

/// Bilinear sweep: plug-in product moments, scaled residual, channel and
/// support pseudo-likelihoods. Damping applies to mu_r and mu_q.
void bilinear_half_step(DetectorState& s, double damping);

/// Gaussian-prior closed form: mu_h = mu_r / (nu_r + 1).
void mmse_channel_step(DetectorState& s);

/// Section-wise posterior: softmax over each section of
/// log prior + (2 Re(mu_q) - 1) / nu_q, evaluated in log domain.
void mmse_support_step(DetectorState& s, const std::vector<SectionPosterior>& priors);

/// Full schedule until convergence (relative mu_x change below tol_stop)
/// or t_max_bigamp sweeps. `trace`, when set, receives one CSV row per
/// iteration: iter,residual_norm,mean_nu_x,mean_nu_h,max_section_mass.
DetectorOutput run(const ComplexMatrix& Y, const Dictionary& A, const ValidatedConfig& config,
                   const std::vector<SectionPosterior>& priors, std::size_t K_current,
                   RngStream& rng, std::ostream* trace = nullptr);

}  // namespace bigamp

/// Detector entry point signature, so the receiver can run with the real
/// detector or a stand-in (e.g. a genie in tests).
using DetectorFn = std::function<DetectorOutput(
    const ComplexMatrix& Y, const Dictionary& A, const ValidatedConfig& config,
    const std::vector<SectionPosterior>& priors, std::size_t K_current, RngStream& rng)>;

}  // namespace urasim
