#include "urasim/receiver.hpp"

#include <cmath>
#include <map>
#include <set>

namespace urasim {

namespace {

// Turbo feedback tempering: scale and clamp the extrinsic LLRs so the
// detector receives a soft prior rather than a hard verdict.
constexpr double kFeedbackScale = 0.75;
constexpr double kFeedbackClamp = 10.0;

DetectorOutput run_detector(const DetectorFn& fn, const ComplexMatrix& Y, const Dictionary& A,
                            const ValidatedConfig& config,
                            const std::vector<SectionPosterior>& priors, std::size_t slots,
                            RngStream& rng) {
  if (fn) return fn(Y, A, config, priors, slots, rng);
  return bigamp::run(Y, A, config, priors, slots, rng);
}

std::size_t slot_count(const ValidatedConfig& config, std::size_t K_current) {
  const double kappa = config.base.slot_overprovision;
  return static_cast<std::size_t>(std::ceil(kappa * static_cast<double>(K_current)));
}

/// Least-squares channel re-estimate from the re-encoded codeword. Called
/// before this round's subtraction, so Y_res still carries the user's own
/// contribution and the projection estimates it directly.
void ls_refine_channel(const ComplexMatrix& Y_res, const Dictionary& A, DecodedEntry& entry,
                       double P) {
  const ComplexMatrix s = modulate(A, entry.support, P);
  const double energy = s.squared_norm();
  if (energy == 0.0) return;
  const std::size_t T = Y_res.rows(), M = Y_res.cols();
  for (std::size_t m = 0; m < M; ++m) {
    cplx acc{};
    for (std::size_t t = 0; t < T; ++t) acc += std::conj(s(t, 0)) * Y_res(t, m);
    entry.channel[m] = acc / energy;
  }
}

}  // namespace

TurboRoundResult turbo_round(const ComplexMatrix& Y_res, const Dictionary& A,
                             const LdpcCode& code, const ValidatedConfig& config,
                             std::size_t K_current,
                             const std::vector<SectionPosterior>& priors,
                             const std::vector<BitVec>& already_decoded, RngStream& rng,
                             const DetectorFn& detector) {
  if (K_current < 1) throw DimensionError("turbo_round: K_current must be >= 1");
  const std::size_t L = config.base.L, m = config.m;
  const std::size_t n_out = config.base.n_out;
  if (n_out == 0) throw DimensionError("turbo_round: outer code disabled (n_out = 0)");

  TurboRoundResult out;
  DetectorOutput det = run_detector(detector, Y_res, A, config, priors, K_current, rng);

  std::set<BitVec> already(already_decoded.begin(), already_decoded.end());
  std::map<BitVec, std::size_t> in_round;  // message -> entry index
  out.feedback_priors.reserve(K_current);
  for (std::size_t slot = 0; slot < K_current; ++slot) {
    const SectionPosterior& post = det.posteriors[slot];
    BitBeliefs bb = sections_to_bit_llrs(post);
    const LdpcCode::SisoResult siso = code.siso_decode(bb);

    if (siso.valid) {
      BitVec message = code.extract_message(siso.hard);
      if (!already.count(message)) {
        const auto hit = in_round.find(message);
        if (hit == in_round.end()) {
          // Re-encode and pad to L*m bits so the support can be rebuilt.
          BitVec codeword = code.encode(message);
          codeword.resize(L * m, 0);
          DecodedEntry entry;
          entry.support = encode_sections(codeword, L, m);
          entry.slot = slot;
          entry.channel.resize(det.channel_mean.cols());
          for (std::size_t c = 0; c < entry.channel.size(); ++c)
            entry.channel[c] = det.channel_mean(slot, c);
          in_round.emplace(message, out.valid.entries.size());
          entry.message = std::move(message);
          out.valid.entries.push_back(std::move(entry));
        } else {
          // Several slots converged onto the same codeword: the model
          // explains its contribution as the sum over those slots, so
          // the single subtraction uses the summed channel estimate.
          DecodedEntry& entry = out.valid.entries[hit->second];
          for (std::size_t c = 0; c < entry.channel.size(); ++c)
            entry.channel[c] += det.channel_mean(slot, c);
        }
      }
      // A decoded slot needs no feedback; keep its prior shape anyway so
      // slots stay aligned on a retry pass.
      out.feedback_priors.emplace_back(L, config.base.Q);
      continue;
    }

    // Extrinsic feedback for the undecoded slot; tail padding is known
    // zero. The extrinsic is tempered before it becomes a prior: a hard
    // wrong prior locks the detector into the same fixed point it is
    // being asked to escape.
    BitBeliefs fb;
    fb.llrs.assign(L * m, kLlrClamp);
    for (std::size_t j = 0; j < n_out; ++j)
      fb.llrs[j] = kFeedbackScale * std::clamp(siso.extrinsic.llrs[j], -kFeedbackClamp,
                                               kFeedbackClamp);
    out.feedback_priors.push_back(bit_llrs_to_section_priors(fb, L, m));
  }

  out.posteriors = std::move(det.posteriors);
  out.channel_mean = std::move(det.channel_mean);
  out.diagnostics = det.diagnostics;
  return out;
}

ComplexMatrix sic_subtract(const ComplexMatrix& Y_res, const Dictionary& A,
                           const DecodedSet& decoded, double P) {
  ComplexMatrix Y_next = Y_res;
  const std::size_t T = Y_res.rows(), M = Y_res.cols();
  for (const DecodedEntry& entry : decoded.entries) {
    if (entry.channel.size() != M)
      throw DimensionError("sic_subtract: channel estimate length != M");
    const ComplexMatrix s = modulate(A, entry.support, P);
    for (std::size_t t = 0; t < T; ++t) {
      const cplx st = s(t, 0);
      if (st == cplx{}) continue;
      for (std::size_t col = 0; col < M; ++col) Y_next(t, col) -= st * entry.channel[col];
    }
  }
  return Y_next;
}

ReceiverResult run_receiver(const ComplexMatrix& Y, const Dictionary& A, const LdpcCode& code,
                            const ValidatedConfig& config, RngStream& rng,
                            const DetectorFn& detector) {
  ReceiverResult result;
  ComplexMatrix Y_res = Y;
  std::size_t K_current = config.base.K_active;
  std::vector<SectionPosterior> priors;
  bool priors_are_feedback = false;

  for (std::size_t round = 1; round <= config.base.t_max_turbo; ++round) {
    if (K_current == 0) break;
    const std::size_t slots = slot_count(config, K_current);
    if (priors.size() != slots)
      priors.assign(slots, SectionPosterior(config.base.L, config.base.Q));

    TurboRoundResult tr;
    try {
      tr = turbo_round(Y_res, A, code, config, slots, priors, result.decoded, rng, detector);
    } catch (const NumericalError& e) {
      result.abort_reason = e.what();
      break;
    }
    result.turbo_rounds = round;
    result.detector_iterations_total += tr.diagnostics.iterations;
    result.section_mass_violations += tr.diagnostics.section_mass_violations;
    result.variance_violations += tr.diagnostics.variance_violations;

    if (!tr.valid.entries.empty()) {
      tr.valid.round = round;
      if (config.base.ls_channel_refine)
        for (DecodedEntry& entry : tr.valid.entries)
          ls_refine_channel(Y_res, A, entry, config.base.P);
      Y_res = sic_subtract(Y_res, A, tr.valid, config.base.P);
      for (const DecodedEntry& entry : tr.valid.entries)
        result.decoded.push_back(entry.message);
      const std::size_t removed = tr.valid.entries.size();
      K_current = K_current > removed ? K_current - removed : 0;
      priors.clear();  // reset to uniform for the shrunk problem
      priors_are_feedback = false;
      result.rounds.push_back(
          {round, removed, Y_res.squared_norm(), tr.diagnostics.iterations});
      continue;
    }

    result.rounds.push_back({round, 0, Y_res.squared_norm(), tr.diagnostics.iterations});
    if (!config.base.feedback_retry || priors_are_feedback) break;
    priors = std::move(tr.feedback_priors);
    priors_are_feedback = true;
  }
  return result;
}

}  // namespace urasim
