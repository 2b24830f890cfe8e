#pragma once

#include <vector>

#include "urasim/dictionary.hpp"
#include "urasim/sparc.hpp"

namespace urasim {

/// Received block plus the ground truth that produced it.
/// Channels are stored K x M (user-major); the math treats row k as the
/// fading vector of user k across the M antennas.
struct Observation {
  ComplexMatrix Y;  // T x M
  SupportMatrix truth_supports;
  ComplexMatrix truth_channels;  // K x M
  std::vector<BitVec> truth_messages;
};

/// K x M matrix of i.i.d. CN(0,1) entries, drawn row-major.
ComplexMatrix draw_channels(std::size_t K, std::size_t M, RngStream& rng);

/// Y = sum_k s_k h_k^T + W with s_k = modulate(A, c_k, P) and
/// w_tm ~ CN(0, sigma2). Noise is drawn (and scaled) even when sigma2 = 0
/// so the stream position does not depend on the noise level.
Observation synthesize(const Dictionary& A, const SupportMatrix& C, const ComplexMatrix& H,
                       double sigma2, double P, RngStream& rng);

/// Fraction of transmitted messages missing from the decoded list
/// (set semantics; duplicates in the decoded list count once).
double pupe(const std::vector<BitVec>& truth, const std::vector<BitVec>& decoded);

/// Number of transmitted messages missing from the decoded list.
std::size_t missed_messages(const std::vector<BitVec>& truth,
                            const std::vector<BitVec>& decoded);

/// |decoded \ truth|, counting distinct spurious messages.
std::size_t false_alarms(const std::vector<BitVec>& truth, const std::vector<BitVec>& decoded);

}  // namespace urasim
