#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "urasim/section_posterior.hpp"
#include "urasim/sparc.hpp"

namespace urasim {

/// LLRs with the convention LLR > 0 <=> bit 0 more likely.
/// Values emitted by this module are clamped to [-kLlrClamp, kLlrClamp].
struct BitBeliefs {
  std::vector<double> llrs;
};

inline constexpr double kLlrClamp = 40.0;

/// Binary LDPC code with a systematic encoder and a flooding sum-product
/// SISO decoder. Construction is seeded progressive edge growth at column
/// weight 3 with near-regular check degrees; 4-cycles are avoided
/// whenever the rate allows it (high-rate short codes where girth 6 is
/// combinatorially impossible keep the unavoidable minimum, see
/// has_four_cycles). The parity-check matrix always has full rank n-k,
/// so the code carries exactly k message bits.
class LdpcCode {
 public:
  /// Throws DegenerateError if no full-rank graph is found within the
  /// retry budget.
  static LdpcCode build_regular(std::size_t n, std::size_t k, std::uint64_t seed,
                                std::size_t max_bp_iters = 50);

  static LdpcCode from_alist(const std::string& path, std::size_t max_bp_iters = 50);
  void save_alist(const std::string& path) const;

  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  std::size_t checks() const { return check_vars_.size(); }
  std::size_t max_bp_iters() const { return max_bp_iters_; }

  /// Positions of the message bits inside a codeword, ascending.
  const std::vector<std::uint32_t>& info_positions() const { return info_cols_; }

  /// Systematic encode: message (length k) -> codeword (length n) whose
  /// syndrome is zero and whose info positions carry the message verbatim.
  BitVec encode(const BitVec& message) const;

  /// message = codeword[info_positions].
  BitVec extract_message(const BitVec& codeword) const;

  /// Zero syndrome on the first n bits (any tail padding is ignored).
  bool check_validity(const BitVec& word) const;

  struct SisoResult {
    BitBeliefs posterior;  ///< channel prior + all check-to-bit messages
    BitBeliefs extrinsic;  ///< posterior - channel prior
    BitVec hard;           ///< length n, bit = (posterior LLR < 0)
    bool valid = false;    ///< hard decision satisfies every parity check
    std::size_t iterations = 0;
  };

  /// Flooding sum-product with syndrome early exit. Never throws on
  /// non-convergence; that is reported through valid = false.
  SisoResult siso_decode(const BitBeliefs& channel_llrs) const;

  /// Per-check variable lists (adjacency), for tests and diagnostics.
  const std::vector<std::vector<std::uint32_t>>& check_adjacency() const { return check_vars_; }

  bool has_four_cycles() const;
  std::size_t count_four_cycles() const;

 private:
  LdpcCode() = default;
  void build_edges();
  bool build_generator();  // Gauss-Jordan over GF(2); false if rank deficient

  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::size_t max_bp_iters_ = 50;
  std::vector<std::vector<std::uint32_t>> check_vars_;  // per check: bit indices, ascending

  // Edge-indexed flattened adjacency for the decoder.
  std::vector<std::uint32_t> edge_var_;                // edge -> variable
  std::vector<std::size_t> check_offset_;              // check -> first edge
  std::vector<std::vector<std::uint32_t>> var_edges_;  // variable -> edges

  // Generator: for each check row (after full elimination) the pivot
  // column and the packed set of info columns feeding its parity.
  std::vector<std::uint32_t> pivot_cols_;              // per check
  std::vector<std::uint32_t> info_cols_;               // ascending, size k
  std::vector<std::vector<std::uint64_t>> parity_of_info_;  // per check: k-bit mask
};

/// Marginalizes a section table to per-bit LLRs (length L*m, big-endian
/// bit order inside each section, probabilities floored at kProbFloor).
BitBeliefs sections_to_bit_llrs(const SectionPosterior& post);

/// Reverse bridge: per-section priors proportional to the product of the
/// per-bit probabilities implied by the LLRs; rows normalized.
SectionPosterior bit_llrs_to_section_priors(const BitBeliefs& bb, std::size_t L, std::size_t m);

}  // namespace urasim
