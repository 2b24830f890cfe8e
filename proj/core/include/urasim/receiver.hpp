#pragma once

#include <string>
#include <vector>

#include "urasim/detector.hpp"
#include "urasim/ldpc.hpp"

namespace urasim {

/// One successfully decoded user: message, re-encoded support, and the
/// detector's channel estimate for the slot that produced it.
struct DecodedEntry {
  BitVec message;
  SupportVector support;
  std::vector<cplx> channel;  // length M
  std::size_t slot = 0;
};

/// Valid decodes collected in one round; messages are unique within the set.
struct DecodedSet {
  std::vector<DecodedEntry> entries;
  std::size_t round = 0;
};

struct RoundTrace {
  std::size_t round = 0;
  std::size_t decoded_count = 0;
  double residual_energy = 0.0;  ///< ||Y_res||_F^2 after this round's subtraction
  std::size_t detector_iterations = 0;
};

struct ReceiverResult {
  std::vector<BitVec> decoded;  ///< union of all rounds, in decode order
  std::vector<RoundTrace> rounds;
  std::size_t turbo_rounds = 0;
  std::size_t detector_iterations_total = 0;
  std::size_t section_mass_violations = 0;
  std::size_t variance_violations = 0;
  std::string abort_reason;  ///< empty on clean termination
};

struct TurboRoundResult {
  DecodedSet valid;
  std::vector<SectionPosterior> posteriors;      ///< per slot
  std::vector<SectionPosterior> feedback_priors; ///< per slot, for the next pass
  ComplexMatrix channel_mean;                    ///< slots x M
  DetectorDiagnostics diagnostics;
};

/// One detection + parallel SISO decoding pass over K_current slots.
/// Valid decodes not present in `already_decoded` enter the result set
/// (first slot wins on in-round duplicates); every invalid slot gets its
/// SISO extrinsic bridged back to section priors, padding positions
/// pinned to zero.
TurboRoundResult turbo_round(const ComplexMatrix& Y_res, const Dictionary& A,
                             const LdpcCode& code, const ValidatedConfig& config,
                             std::size_t K_current,
                             const std::vector<SectionPosterior>& priors,
                             const std::vector<BitVec>& already_decoded, RngStream& rng,
                             const DetectorFn& detector = {});

/// Y_next = Y_res - sum over decoded entries of modulate(A, c, P) * h^T.
ComplexMatrix sic_subtract(const ComplexMatrix& Y_res, const Dictionary& A,
                           const DecodedSet& decoded, double P);

/// Full loop: detection/decoding rounds with interference cancellation,
/// until a round yields nothing, every user is accounted for, or
/// t_max_turbo rounds have run. With feedback_retry enabled an empty
/// round is retried once with the bridged extrinsic priors before the
/// loop exits.
ReceiverResult run_receiver(const ComplexMatrix& Y, const Dictionary& A, const LdpcCode& code,
                            const ValidatedConfig& config, RngStream& rng,
                            const DetectorFn& detector = {});

}  // namespace urasim
