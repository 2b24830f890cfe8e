#pragma once

#include <cstdint>
#include <vector>

#include "urasim/dictionary.hpp"
#include "urasim/section_posterior.hpp"

namespace urasim {

using BitVec = std::vector<std::uint8_t>;  // one bit per element, values 0/1

/// One user's inner-code support: exactly one active position per section.
struct SupportVector {
  std::size_t Q = 0;
  std::vector<std::uint32_t> sections;  // L entries, each in [0, Q)

  std::size_t L() const { return sections.size(); }
  std::size_t N() const { return sections.size() * Q; }

  /// Dense N-length 0/1 view; section l occupies block [l*Q, (l+1)*Q).
  std::vector<std::uint8_t> dense() const;
  static SupportVector from_dense(const std::vector<std::uint8_t>& dense, std::size_t L,
                                  std::size_t Q);

  /// Global column indices into the dictionary (l*Q + sections[l]).
  std::vector<std::uint32_t> column_indices() const;

  friend bool operator==(const SupportVector& a, const SupportVector& b) = default;
};

/// K user columns; the N x K binary support matrix, section-structured.
struct SupportMatrix {
  std::vector<SupportVector> columns;

  std::size_t K() const { return columns.size(); }
};

/// Splits codeword_bits (length exactly L*m, big-endian within each m-bit
/// chunk) into section indices.
SupportVector encode_sections(const BitVec& codeword_bits, std::size_t L, std::size_t m);

/// Exact inverse of encode_sections.
BitVec decode_sections(const SupportVector& v);

/// s = sqrt(alpha) * A * c with alpha = P / ||A c||^2, so ||s||^2 = P.
/// Returns a T x 1 matrix.
ComplexMatrix modulate(const Dictionary& A, const SupportVector& v, double P);

/// Per-section argmax; ties break toward the smallest index.
SupportVector hard_decision(const SectionPosterior& post);

}  // namespace urasim
