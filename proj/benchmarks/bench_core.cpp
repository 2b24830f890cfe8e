#include <benchmark/benchmark.h>

#include "urasim/detector.hpp"
#include "urasim/harness.hpp"

using namespace urasim;

namespace {

ValidatedConfig desk_config(std::size_t M) {
  SystemConfig cfg;
  cfg.K_active = 8;
  cfg.M = M;
  cfg.T = 256;
  cfg.B = 16;
  cfg.L = 8;
  cfg.Q = 16;
  cfg.n_out = 32;
  cfg.P = 1.0;
  return validate(cfg);
}

}  // namespace

static void DictionaryForwardDense(benchmark::State& state) {
  const auto cfg = desk_config(8);
  const auto dict =
      Dictionary::build(DictionaryKind::gaussian, cfg.base.T, cfg.N, RngStream(1, 0));
  RngStream rng(2, 0);
  ComplexMatrix X(cfg.N, cfg.base.M);
  for (std::size_t i = 0; i < X.size(); ++i) X.data()[i] = rng.cnormal();
  for (auto _ : state) {
    auto Y = dict.forward(X);
    benchmark::DoNotOptimize(Y.data());
  }
}
BENCHMARK(DictionaryForwardDense);

static void DictionaryForwardFft(benchmark::State& state) {
  // T = N/2 so the subsampled transform is legal.
  const auto dict = Dictionary::build(DictionaryKind::subsampled_dft, 1024, 2048,
                                      RngStream(1, 0));
  RngStream rng(2, 0);
  ComplexMatrix X(2048, 8);
  for (std::size_t i = 0; i < X.size(); ++i) X.data()[i] = rng.cnormal();
  for (auto _ : state) {
    auto Y = dict.forward(X);
    benchmark::DoNotOptimize(Y.data());
  }
}
BENCHMARK(DictionaryForwardFft);

static void DetectorSweep(benchmark::State& state) {
  const auto cfg = desk_config(static_cast<std::size_t>(state.range(0)));
  const auto dict =
      Dictionary::build(DictionaryKind::gaussian, cfg.base.T, cfg.N, RngStream(3, 0));
  RngStream rng(4, 0);
  ComplexMatrix Y(cfg.base.T, cfg.base.M);
  for (std::size_t i = 0; i < Y.size(); ++i) Y.data()[i] = rng.cnormal();
  const std::vector<SectionPosterior> priors(cfg.base.K_active,
                                             SectionPosterior(cfg.base.L, cfg.base.Q));
  RngStream init_rng(5, 0);
  DetectorState s = bigamp::init(cfg, Y, cfg.base.K_active, init_rng);
  for (auto _ : state) {
    bigamp::affine_half_step(s, dict, Y, cfg.base.sigma2, cfg.base.damping);
    bigamp::bilinear_half_step(s, cfg.base.damping);
    bigamp::mmse_channel_step(s);
    bigamp::mmse_support_step(s, priors);
    benchmark::DoNotOptimize(s.mu_c.data());
  }
}
BENCHMARK(DetectorSweep)->Arg(8)->Arg(16)->Arg(32);

static void LdpcSisoDecode(benchmark::State& state) {
  const LdpcCode code = LdpcCode::build_regular(128, 64, 7);
  RngStream rng(6, 0);
  BitVec msg(64);
  for (auto& b : msg) b = static_cast<std::uint8_t>(rng.next_u64() & 1);
  const BitVec word = code.encode(msg);
  BitBeliefs bb;
  bb.llrs.resize(128);
  for (std::size_t i = 0; i < 128; ++i)
    bb.llrs[i] = (word[i] ? -1.0 : 1.0) * 2.0 + rng.normal();
  for (auto _ : state) {
    auto res = code.siso_decode(bb);
    benchmark::DoNotOptimize(res.valid);
  }
}
BENCHMARK(LdpcSisoDecode);

static void EndToEndTrial(benchmark::State& state) {
  SystemConfig cfg;
  cfg.K_active = 8;
  cfg.M = 8;
  cfg.T = 256;
  cfg.B = 16;
  cfg.L = 8;
  cfg.Q = 16;
  cfg.n_out = 32;
  set_power_from_eb_n0_db(cfg, 14.0);
  const ScenarioContext ctx = make_context(cfg);
  std::size_t trial = 0;
  for (auto _ : state) {
    auto rec = run_trial(ctx, trial++);
    benchmark::DoNotOptimize(rec.pupe);
  }
}
BENCHMARK(EndToEndTrial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
