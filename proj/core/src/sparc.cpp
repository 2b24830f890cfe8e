#include "urasim/sparc.hpp"

#include <cmath>

namespace urasim {

std::vector<std::uint8_t> SupportVector::dense() const {
  std::vector<std::uint8_t> out(N(), 0);
  for (std::size_t l = 0; l < L(); ++l) out[l * Q + sections[l]] = 1;
  return out;
}

SupportVector SupportVector::from_dense(const std::vector<std::uint8_t>& dense, std::size_t L,
                                        std::size_t Q) {
  if (dense.size() != L * Q) throw DimensionError("from_dense: length != L*Q");
  SupportVector v;
  v.Q = Q;
  v.sections.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    std::size_t ones = 0, idx = 0;
    for (std::size_t q = 0; q < Q; ++q) {
      if (dense[l * Q + q]) {
        ++ones;
        idx = q;
      }
    }
    if (ones != 1)
      throw DimensionError("from_dense: section " + std::to_string(l) + " has " +
                           std::to_string(ones) + " ones, expected exactly 1");
    v.sections[l] = static_cast<std::uint32_t>(idx);
  }
  return v;
}

std::vector<std::uint32_t> SupportVector::column_indices() const {
  std::vector<std::uint32_t> idx(L());
  for (std::size_t l = 0; l < L(); ++l)
    idx[l] = static_cast<std::uint32_t>(l * Q + sections[l]);
  return idx;
}

SupportVector encode_sections(const BitVec& codeword_bits, std::size_t L, std::size_t m) {
  if (codeword_bits.size() != L * m)
    throw LengthError("encode_sections: got " + std::to_string(codeword_bits.size()) +
                      " bits, expected L*m = " + std::to_string(L * m));
  SupportVector v;
  v.Q = std::size_t{1} << m;
  v.sections.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    std::uint32_t idx = 0;
    for (std::size_t j = 0; j < m; ++j)
      idx = (idx << 1) | static_cast<std::uint32_t>(codeword_bits[l * m + j] & 1);
    v.sections[l] = idx;
  }
  return v;
}

BitVec decode_sections(const SupportVector& v) {
  std::size_t m = 0;
  while ((std::size_t{1} << m) < v.Q) ++m;
  BitVec bits(v.L() * m, 0);
  for (std::size_t l = 0; l < v.L(); ++l)
    for (std::size_t j = 0; j < m; ++j)
      bits[l * m + j] = static_cast<std::uint8_t>((v.sections[l] >> (m - 1 - j)) & 1);
  return bits;
}

ComplexMatrix modulate(const Dictionary& A, const SupportVector& v, double P) {
  if (v.N() != A.N())
    throw DimensionError("modulate: support length " + std::to_string(v.N()) +
                         " != dictionary N = " + std::to_string(A.N()));
  ComplexMatrix s(A.T(), 1);
  if (P == 0.0) return s;
  const std::vector<cplx> raw = A.combine_columns(v.column_indices());
  double energy = 0.0;
  for (const cplx& x : raw) energy += std::norm(x);
  if (energy == 0.0) throw DegenerateError("modulate: ||A c|| = 0");
  const double scale = std::sqrt(P / energy);
  for (std::size_t t = 0; t < raw.size(); ++t) s(t, 0) = raw[t] * scale;
  return s;
}

SupportVector hard_decision(const SectionPosterior& post) {
  SupportVector v;
  v.Q = post.section_size();
  v.sections.resize(post.sections());
  for (std::size_t l = 0; l < post.sections(); ++l) {
    std::size_t best = 0;
    double best_p = post(l, 0);
    for (std::size_t q = 1; q < post.section_size(); ++q) {
      if (post(l, q) > best_p) {  // strict: ties keep the smaller index
        best_p = post(l, q);
        best = q;
      }
    }
    v.sections[l] = static_cast<std::uint32_t>(best);
  }
  return v;
}

}  // namespace urasim
