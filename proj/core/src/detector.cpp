#include "urasim/detector.hpp"

#include <algorithm>
#include <cmath>

namespace urasim {
namespace bigamp {

namespace {

double clamp_var(double v) { return std::clamp(v, kVarFloor, kVarCap); }

// Guards on the residual correction. Each element behaves as a denoiser
// slope, which lives in [0, 1]; the curvature term can exceed that
// transiently at very low noise. The summed coefficient multiplying the
// previous residual must stay below 1 or the residual recursion feeds on
// itself once N >= T.
constexpr double kResidualCorrectionCap = 1.0;
constexpr double kResidualMomentumCap = 0.9;
constexpr double kDeflationFloor = 0.0;

// Deflation factor (1 - nu * sum of variance products) for the r/q
// pseudo-likelihood means. The raw expression removes the estimate's own
// contribution from the matched filter; on uninformative data it goes
// negative (the self-fit exceeds the evidence) and must stay bounded or
// it turns into gain on the means once the variance caps engage.
double deflation_factor(double nu, double variance_sum) {
  return std::clamp(1.0 - nu * variance_sum, kDeflationFloor, 1.0);
}

double safe_inverse(double v) {
  if (!(v > 1.0 / kVarCap)) return kVarCap;
  return clamp_var(1.0 / v);
}

void require_finite(const ComplexMatrix& m, const char* what, std::size_t iter) {
  if (!m.all_finite()) throw NumericalError(std::string(what) + " went non-finite", iter);
}

void require_finite(const RealMatrix& m, const char* what, std::size_t iter) {
  if (!m.all_finite()) throw NumericalError(std::string(what) + " went non-finite", iter);
}

}  // namespace

DetectorState init(const ValidatedConfig& config, const ComplexMatrix& Y,
                   std::size_t K_current, RngStream& rng) {
  if (K_current < 1) throw DimensionError("detector init: K_current must be >= 1");
  const std::size_t N = config.N, L = config.base.L, Q = config.base.Q;
  const std::size_t T = config.base.T, M = config.base.M;
  require_shape(Y, T, M, "detector init: Y");

  DetectorState s;
  s.N = N;
  s.M = M;
  s.T = T;
  s.K = K_current;
  s.L = L;
  s.Q = Q;

  const double uniform = 1.0 / static_cast<double>(Q);
  s.mu_c = RealMatrix(N, K_current, uniform);
  if (config.base.init_perturb > 0.0) {
    // Seeded jitter breaks the exact symmetry between user slots, then
    // each section is renormalized so the mass invariant holds at t = 0.
    const double scale = config.base.init_perturb;
    for (std::size_t k = 0; k < K_current; ++k)
      for (std::size_t n = 0; n < N; ++n)
        s.mu_c(n, k) = uniform * (1.0 + scale * (2.0 * rng.uniform01() - 1.0));
    for (std::size_t k = 0; k < K_current; ++k)
      for (std::size_t l = 0; l < L; ++l) {
        double sum = 0.0;
        for (std::size_t q = 0; q < Q; ++q) sum += s.mu_c(l * Q + q, k);
        for (std::size_t q = 0; q < Q; ++q) s.mu_c(l * Q + q, k) /= sum;
      }
  }
  s.nu_c = RealMatrix(N, K_current);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K_current; ++k) {
      const double c = s.mu_c(n, k);
      s.nu_c(n, k) = clamp_var(c * (1.0 - c));
    }

  s.mu_h = ComplexMatrix(K_current, M);
  if (config.base.init_channel_prior_draw)
    for (std::size_t k = 0; k < K_current; ++k)
      for (std::size_t m = 0; m < M; ++m) s.mu_h(k, m) = rng.cnormal();
  s.nu_h = RealMatrix(K_current, M, 1.0);

  // Product-plane prior: x_nm = sum_k c_nk h_km has mean 0 and variance
  // K/Q under the section and channel priors.
  const double x_var = static_cast<double>(K_current) / static_cast<double>(Q);
  s.mu_x = ComplexMatrix(N, M);
  s.nu_x = RealMatrix(N, M, clamp_var(x_var));
  s.mu_z = Y;
  s.nu_z.assign(M, clamp_var(config.base.sigma2 + static_cast<double>(N) * x_var /
                                                      static_cast<double>(T)));

  s.theta = ComplexMatrix(N, M);
  s.mu_p = ComplexMatrix(N, M);
  s.nu_p = RealMatrix(N, M, clamp_var(x_var));  // plug-in prior at t = 0
  s.mu_alpha = ComplexMatrix(N, M);
  s.nu_alpha = RealMatrix(N, M, kVarFloor);
  s.mu_r = ComplexMatrix(K_current, M);
  s.nu_r = RealMatrix(K_current, M, kVarFloor);
  s.mu_q = ComplexMatrix(N, K_current);
  s.nu_q = RealMatrix(N, K_current, kVarFloor);
  return s;
}

void affine_half_step(DetectorState& s, const Dictionary& A, const ComplexMatrix& Y,
                      double sigma2, double damping) {
  const std::size_t N = s.N, M = s.M, T = s.T;
  require_shape(Y, T, M, "affine step: Y");

  // theta = A^H mu_z + mu_x.
  s.theta = A.adjoint(s.mu_z);
  for (std::size_t i = 0; i < s.theta.size(); ++i) s.theta.data()[i] += s.mu_x.data()[i];

  // Product-plane posterior: the pseudo-observation theta (noise nu_z) is
  // combined with the bilinear plug-in prediction (mu_p, nu_p) acting as
  // the prior. Blending against the chain's own previous posterior would
  // re-absorb the same observation every sweep and shrink nu_x ~ 1/iter
  // with no new information.
  ComplexMatrix mu_x_cand(N, M);
  RealMatrix nu_x_new(N, M);
  std::vector<double> f_sum(M, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t m = 0; m < M; ++m) {
      const double vp = s.nu_p(n, m);
      const double vz = s.nu_z[m];
      const double denom = vp + vz;
      mu_x_cand(n, m) = (s.theta(n, m) * vp + s.mu_p(n, m) * vz) / denom;
      nu_x_new(n, m) = clamp_var(vp * vz / denom);
      // First-order residual correction: the denoiser slope at this
      // sweep's theta plus its curvature term.
      const double f =
          vp / denom + vp * vp * std::norm(s.theta(n, m)) / (vz * denom * denom);
      f_sum[m] += std::min(f, kResidualCorrectionCap);
    }
  }

  // Residual of the fresh estimate; the correction reuses the previous
  // residual, which keeps successive sweeps decoupled.
  ComplexMatrix mu_z_cand = A.forward(mu_x_cand);
  for (std::size_t m = 0; m < M; ++m)
    f_sum[m] = std::min(f_sum[m] / static_cast<double>(T), kResidualMomentumCap);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t m = 0; m < M; ++m)
      mu_z_cand(t, m) = Y(t, m) - mu_z_cand(t, m) + s.mu_z(t, m) * f_sum[m];

  const double keep = 1.0 - damping;
  for (std::size_t i = 0; i < s.mu_x.size(); ++i)
    s.mu_x.data()[i] = damping * mu_x_cand.data()[i] + keep * s.mu_x.data()[i];
  for (std::size_t i = 0; i < s.mu_z.size(); ++i)
    s.mu_z.data()[i] = damping * mu_z_cand.data()[i] + keep * s.mu_z.data()[i];
  s.nu_x = nu_x_new;
  for (std::size_t m = 0; m < M; ++m) {
    double acc = 0.0;
    for (std::size_t n = 0; n < N; ++n) acc += s.nu_x(n, m);
    s.nu_z[m] = clamp_var(sigma2 + acc / static_cast<double>(T));
  }

  require_finite(s.mu_x, "mu_x", s.iter);
  require_finite(s.mu_z, "mu_z", s.iter);
  for (const double v : s.nu_z)
    if (!std::isfinite(v)) throw NumericalError("nu_z went non-finite", s.iter);
}

void bilinear_half_step(DetectorState& s, double damping) {
  const std::size_t N = s.N, M = s.M, K = s.K;

  // Plug-in product moments; the mean carries a correction built from the
  // previous sweep's scaled residual.
  RealMatrix nu_p_new(N, M);
  RealMatrix gbar(N, M);  // sum_k |mu_c|^2 nu_h + nu_c |mu_h|^2
  ComplexMatrix mu_p_new(N, M);
  for (std::size_t n = 0; n < N; ++n) {
    double* sp = nu_p_new.row(n).data();
    double* gb = gbar.row(n).data();
    cplx* pr = mu_p_new.row(n).data();
    for (std::size_t k = 0; k < K; ++k) {
      const double c = s.mu_c(n, k);
      const double c2 = c * c;
      const double vc = s.nu_c(n, k);
      const cplx* hrow = s.mu_h.row(k).data();
      const double* vhrow = s.nu_h.row(k).data();
      for (std::size_t m = 0; m < M; ++m) {
        const double t1 = c2 * vhrow[m] + vc * std::norm(hrow[m]);
        sp[m] += t1 + vc * vhrow[m];
        gb[m] += t1;
        pr[m] += c * hrow[m];
      }
    }
  }
  for (std::size_t i = 0; i < mu_p_new.size(); ++i) {
    mu_p_new.data()[i] -= s.mu_alpha.data()[i] * gbar.data()[i];
    nu_p_new.data()[i] = clamp_var(nu_p_new.data()[i]);
  }
  s.mu_p = std::move(mu_p_new);
  s.nu_p = std::move(nu_p_new);

  // Scaled residual between the affine estimate of X and the plug-in
  // bilinear prediction. The mean uses the capped inverse so both stay
  // on a common scale when the denominator collapses.
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t m = 0; m < M; ++m) {
      const double denom = s.nu_p(n, m) + s.nu_x(n, m);
      s.nu_alpha(n, m) = safe_inverse(denom);
      s.mu_alpha(n, m) = (s.mu_x(n, m) - s.mu_p(n, m)) * s.nu_alpha(n, m);
    }

  // Channel pseudo-likelihood.
  std::vector<double> g1(M), g2(M);
  std::vector<cplx> g3(M);
  const double keep = 1.0 - damping;
  for (std::size_t k = 0; k < K; ++k) {
    std::fill(g1.begin(), g1.end(), 0.0);
    std::fill(g2.begin(), g2.end(), 0.0);
    std::fill(g3.begin(), g3.end(), cplx{});
    for (std::size_t n = 0; n < N; ++n) {
      const double c = s.mu_c(n, k);
      const double c2 = c * c;
      const double vc = s.nu_c(n, k);
      const double* arow = s.nu_alpha.row(n).data();
      const cplx* marow = s.mu_alpha.row(n).data();
      for (std::size_t m = 0; m < M; ++m) {
        g1[m] += c2 * arow[m];
        g2[m] += vc * arow[m];
        g3[m] += c * marow[m];
      }
    }
    for (std::size_t m = 0; m < M; ++m) {
      const double vr = safe_inverse(g1[m]);
      s.nu_r(k, m) = vr;
      const cplx cand = s.mu_h(k, m) * deflation_factor(vr, g2[m]) + vr * g3[m];
      s.mu_r(k, m) = damping * cand + keep * s.mu_r(k, m);
    }
  }

  // Support pseudo-likelihood.
  for (std::size_t n = 0; n < N; ++n) {
    const double* arow = s.nu_alpha.row(n).data();
    const cplx* marow = s.mu_alpha.row(n).data();
    for (std::size_t k = 0; k < K; ++k) {
      const cplx* hrow = s.mu_h.row(k).data();
      const double* vhrow = s.nu_h.row(k).data();
      double d1 = 0.0, d2 = 0.0;
      cplx d3{};
      for (std::size_t m = 0; m < M; ++m) {
        d1 += std::norm(hrow[m]) * arow[m];
        d2 += vhrow[m] * arow[m];
        d3 += std::conj(hrow[m]) * marow[m];
      }
      const double vq = safe_inverse(d1);
      s.nu_q(n, k) = vq;
      const cplx cand = s.mu_c(n, k) * deflation_factor(vq, d2) + vq * d3;
      s.mu_q(n, k) = damping * cand + keep * s.mu_q(n, k);
    }
  }

  require_finite(s.mu_p, "mu_p", s.iter);
  require_finite(s.mu_alpha, "mu_alpha", s.iter);
  require_finite(s.mu_r, "mu_r", s.iter);
  require_finite(s.mu_q, "mu_q", s.iter);
}

void mmse_channel_step(DetectorState& s) {
  for (std::size_t k = 0; k < s.K; ++k)
    for (std::size_t m = 0; m < s.M; ++m) {
      const double vr = s.nu_r(k, m);
      s.mu_h(k, m) = s.mu_r(k, m) / (vr + 1.0);
      s.nu_h(k, m) = clamp_var(vr / (vr + 1.0));
    }
}

void mmse_support_step(DetectorState& s, const std::vector<SectionPosterior>& priors) {
  if (priors.size() != s.K)
    throw DimensionError("mmse_support_step: priors count != K_current");
  const std::size_t L = s.L, Q = s.Q;
  std::vector<double> logit(Q);
  for (std::size_t k = 0; k < s.K; ++k) {
    const SectionPosterior& prior = priors[k];
    if (prior.sections() != L || prior.section_size() != Q)
      throw DimensionError("mmse_support_step: prior table shape mismatch");
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t base = l * Q;
      double max_logit = -1e300;
      for (std::size_t q = 0; q < Q; ++q) {
        const std::size_t n = base + q;
        const double lp = std::log(std::max(prior(l, q), kProbFloor));
        logit[q] = lp + (2.0 * s.mu_q(n, k).real() - 1.0) / s.nu_q(n, k);
        max_logit = std::max(max_logit, logit[q]);
      }
      double norm = 0.0;
      for (std::size_t q = 0; q < Q; ++q) norm += std::exp(logit[q] - max_logit);
      double mass = 0.0;
      for (std::size_t q = 0; q < Q; ++q) {
        const double p = std::exp(logit[q] - max_logit) / norm;
        const std::size_t n = base + q;
        s.mu_c(n, k) = p;
        s.nu_c(n, k) = clamp_var(p * (1.0 - p));
        mass += p;
      }
      if (std::abs(mass - 1.0) > 1e-9) ++s.section_mass_violations;
    }
  }

  // Post-step audit of the variance planes.
  const auto audit = [&s](const RealMatrix& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = v.data()[i];
      if (!(x >= kVarFloor && x <= kVarCap)) ++s.variance_violations;
    }
  };
  audit(s.nu_x);
  audit(s.nu_p);
  audit(s.nu_alpha);
  audit(s.nu_r);
  audit(s.nu_q);
  audit(s.nu_h);
  audit(s.nu_c);
  for (const double v : s.nu_z)
    if (!(v >= kVarFloor && v <= kVarCap)) ++s.variance_violations;
  if (!s.mu_c.all_finite()) throw NumericalError("mu_c went non-finite", s.iter);
}

DetectorOutput run(const ComplexMatrix& Y, const Dictionary& A, const ValidatedConfig& config,
                   const std::vector<SectionPosterior>& priors, std::size_t K_current,
                   RngStream& rng, std::ostream* trace) {
  DetectorState s = init(config, Y, K_current, rng);
  const double sigma2 = config.base.sigma2;
  const double damping = config.base.damping;
  const double tol = config.base.tol_stop;

  DetectorDiagnostics diag;
  ComplexMatrix mu_x_prev;
  for (std::size_t i = 1; i <= config.base.t_max_bigamp; ++i) {
    s.iter = i;
    mu_x_prev = s.mu_x;
    affine_half_step(s, A, Y, sigma2, damping);
    bilinear_half_step(s, damping);
    mmse_channel_step(s);
    mmse_support_step(s, priors);
    diag.iterations = i;

    double num = 0.0;
    for (std::size_t j = 0; j < s.mu_x.size(); ++j)
      num += std::norm(s.mu_x.data()[j] - mu_x_prev.data()[j]);
    const double den = std::max(mu_x_prev.squared_norm(), 1e-300);
    diag.final_delta = std::sqrt(num / den);

    if (trace) {
      double mean_nu_x = 0.0, mean_nu_h = 0.0, max_mass = 0.0;
      for (std::size_t j = 0; j < s.nu_x.size(); ++j) mean_nu_x += s.nu_x.data()[j];
      mean_nu_x /= static_cast<double>(s.nu_x.size());
      for (std::size_t j = 0; j < s.nu_h.size(); ++j) mean_nu_h += s.nu_h.data()[j];
      mean_nu_h /= static_cast<double>(s.nu_h.size());
      for (std::size_t j = 0; j < s.mu_c.size(); ++j)
        max_mass = std::max(max_mass, s.mu_c.data()[j]);
      (*trace) << i << "," << s.mu_z.frobenius_norm() << "," << mean_nu_x << "," << mean_nu_h
               << "," << max_mass << "\n";
    }
    if (diag.final_delta < tol) {
      diag.converged = true;
      break;
    }
  }

  DetectorOutput out;
  out.posteriors.reserve(K_current);
  for (std::size_t k = 0; k < K_current; ++k) {
    SectionPosterior post(s.L, s.Q);
    for (std::size_t l = 0; l < s.L; ++l)
      for (std::size_t q = 0; q < s.Q; ++q) post(l, q) = s.mu_c(l * s.Q + q, k);
    out.posteriors.push_back(std::move(post));
  }
  out.channel_mean = s.mu_h;
  out.channel_var = s.nu_h;
  diag.final_residual_norm = s.mu_z.frobenius_norm();
  diag.section_mass_violations = s.section_mass_violations;
  diag.variance_violations = s.variance_violations;
  out.diagnostics = diag;
  return out;
}

}  // namespace bigamp
}  // namespace urasim
