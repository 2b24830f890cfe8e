#include "urasim/channel.hpp"

#include <cmath>
#include <set>

namespace urasim {

ComplexMatrix draw_channels(std::size_t K, std::size_t M, RngStream& rng) {
  if (K < 1 || M < 1) throw DimensionError("draw_channels: K and M must be >= 1");
  ComplexMatrix H(K, M);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t m = 0; m < M; ++m) H(k, m) = rng.cnormal();
  return H;
}

Observation synthesize(const Dictionary& A, const SupportMatrix& C, const ComplexMatrix& H,
                       double sigma2, double P, RngStream& rng) {
  const std::size_t K = C.K();
  if (H.rows() != K) throw DimensionError("synthesize: H rows != K");
  if (sigma2 < 0.0) throw DimensionError("synthesize: sigma2 must be >= 0");
  const std::size_t T = A.T(), M = H.cols();

  Observation obs;
  obs.Y = ComplexMatrix(T, M);
  for (std::size_t k = 0; k < K; ++k) {
    if (C.columns[k].N() != A.N()) throw DimensionError("synthesize: support length != N");
    const ComplexMatrix s = modulate(A, C.columns[k], P);
    for (std::size_t t = 0; t < T; ++t) {
      const cplx st = s(t, 0);
      if (st == cplx{}) continue;
      for (std::size_t m = 0; m < M; ++m) obs.Y(t, m) += st * H(k, m);
    }
  }
  const double noise_scale = std::sqrt(sigma2);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t m = 0; m < M; ++m) obs.Y(t, m) += noise_scale * rng.cnormal();

  if (!obs.Y.all_finite()) throw NumericalError("synthesize produced non-finite samples", 0);
  obs.truth_supports = C;
  obs.truth_channels = H;
  return obs;
}

std::size_t missed_messages(const std::vector<BitVec>& truth,
                            const std::vector<BitVec>& decoded) {
  const std::set<BitVec> got(decoded.begin(), decoded.end());
  std::size_t missed = 0;
  for (const BitVec& w : truth)
    if (!got.count(w)) ++missed;
  return missed;
}

double pupe(const std::vector<BitVec>& truth, const std::vector<BitVec>& decoded) {
  if (truth.empty()) throw EmptyTruthError("pupe: empty ground-truth message list");
  return static_cast<double>(missed_messages(truth, decoded)) /
         static_cast<double>(truth.size());
}

std::size_t false_alarms(const std::vector<BitVec>& truth, const std::vector<BitVec>& decoded) {
  const std::set<BitVec> sent(truth.begin(), truth.end());
  const std::set<BitVec> got(decoded.begin(), decoded.end());
  std::size_t extra = 0;
  for (const BitVec& w : got)
    if (!sent.count(w)) ++extra;
  return extra;
}

}  // namespace urasim
