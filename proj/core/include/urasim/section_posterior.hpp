#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "urasim/errors.hpp"

namespace urasim {

/// Probabilities are floored at this value before any log.
inline constexpr double kProbFloor = 1e-30;

/// L x Q row-stochastic table: row l is a probability vector over the Q
/// candidate one-hot positions of section l. Also used for section priors
/// fed back from the outer decoder (uniform rows on the first pass).
class SectionPosterior {
 public:
  SectionPosterior() = default;

  /// Uniform table: every row is 1/Q.
  SectionPosterior(std::size_t L, std::size_t Q)
      : L_(L), Q_(Q), p_(L * Q, Q ? 1.0 / static_cast<double>(Q) : 0.0) {}

  static SectionPosterior delta(std::size_t L, std::size_t Q,
                                const std::vector<std::uint32_t>& sections) {
    SectionPosterior out(L, Q);
    if (sections.size() != L) throw DimensionError("delta: section count mismatch");
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t q = 0; q < Q; ++q) out(l, q) = 0.0;
      out(l, sections[l]) = 1.0;
    }
    return out;
  }

  std::size_t sections() const { return L_; }
  std::size_t section_size() const { return Q_; }

  double& operator()(std::size_t l, std::size_t q) { return p_[l * Q_ + q]; }
  double operator()(std::size_t l, std::size_t q) const { return p_[l * Q_ + q]; }

  std::span<double> row(std::size_t l) { return {p_.data() + l * Q_, Q_}; }
  std::span<const double> row(std::size_t l) const { return {p_.data() + l * Q_, Q_}; }

  double row_sum(std::size_t l) const {
    double s = 0.0;
    for (double v : row(l)) s += v;
    return s;
  }

  void normalize_rows() {
    for (std::size_t l = 0; l < L_; ++l) {
      const double s = row_sum(l);
      if (s <= 0.0) {
        for (double& v : row(l)) v = 1.0 / static_cast<double>(Q_);
      } else {
        for (double& v : row(l)) v /= s;
      }
    }
  }

  /// Largest |row_sum - 1| over all rows.
  double max_row_sum_error() const {
    double e = 0.0;
    for (std::size_t l = 0; l < L_; ++l) {
      const double d = row_sum(l) - 1.0;
      e = std::max(e, d < 0 ? -d : d);
    }
    return e;
  }

 private:
  std::size_t L_ = 0;
  std::size_t Q_ = 0;
  std::vector<double> p_;
};

}  // namespace urasim
