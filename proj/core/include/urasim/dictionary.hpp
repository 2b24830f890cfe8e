#pragma once

#include <memory>
#include <string>
#include <vector>

#include "urasim/config.hpp"
#include "urasim/matrix.hpp"
#include "urasim/rng.hpp"

namespace urasim {

/// Shared T x N sensing dictionary with unit-norm columns.
///
/// Immutable after build(); forward/adjoint are pure and safe to call
/// concurrently. For subsampled_dft the applications run through an FFT
/// when available; the FFT path matches the dense product to 1e-10 and
/// the dense path stays the reference.
class Dictionary {
 public:
  static Dictionary build(DictionaryKind kind, std::size_t T, std::size_t N, RngStream rng);

  DictionaryKind kind() const { return kind_; }
  std::size_t T() const { return matrix_.rows(); }
  std::size_t N() const { return matrix_.cols(); }

  const ComplexMatrix& matrix() const { return matrix_; }
  const std::vector<double>& column_norms() const { return column_norms_; }
  /// |a_tn|^2, row-major T x N; precomputed once per dictionary.
  const RealMatrix& entry_abs2() const { return entry_abs2_; }

  /// A * X, X is N x M.
  ComplexMatrix forward(const ComplexMatrix& X) const;
  /// A^H * Y, Y is T x M.
  ComplexMatrix adjoint(const ComplexMatrix& Y) const;

  /// Reference implementations (always the dense product).
  ComplexMatrix forward_dense(const ComplexMatrix& X) const;
  ComplexMatrix adjoint_dense(const ComplexMatrix& Y) const;

  /// Single-column helper: A * c for a set of selected columns.
  std::vector<cplx> combine_columns(const std::vector<std::uint32_t>& columns) const;

  /// Binary dump/load: little-endian header (kind, T, N, seed, stream)
  /// followed by interleaved re/im doubles, row-major.
  void dump(const std::string& path) const;
  static Dictionary load(const std::string& path);

 private:
  Dictionary() = default;
  void finalize();  // norms, |a|^2, FFT plans

  DictionaryKind kind_ = DictionaryKind::gaussian;
  ComplexMatrix matrix_;
  std::vector<double> column_norms_;
  RealMatrix entry_abs2_;
  std::vector<std::uint32_t> dft_rows_;  // sampled DFT rows, ascending (dft kind)
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;

  struct FftPlans;
  std::shared_ptr<FftPlans> fft_;  // null when FFT unavailable or kind gaussian
};

}  // namespace urasim
