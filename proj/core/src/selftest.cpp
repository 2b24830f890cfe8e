#include <cmath>
#include <ostream>

#include "urasim/harness.hpp"

namespace urasim {

namespace {

bool report(std::ostream& out, const char* name, bool ok) {
  out << (ok ? "PASS" : "FAIL") << "  " << name << "\n";
  return ok;
}

}  // namespace

bool selftest(std::ostream& out) {
  bool all = true;

  // Dictionary adjoint identity <A x, y> = <x, A^H y>.
  {
    RngStream rng(7, 1);
    const Dictionary A = Dictionary::build(DictionaryKind::gaussian, 16, 32, RngStream(7, 2));
    ComplexMatrix X(32, 3), Y(16, 3);
    for (std::size_t i = 0; i < X.size(); ++i) X.data()[i] = rng.cnormal();
    for (std::size_t i = 0; i < Y.size(); ++i) Y.data()[i] = rng.cnormal();
    const cplx lhs = inner_product(A.forward(X), Y);
    const cplx rhs = inner_product(X, A.adjoint(Y));
    all &= report(out, "dictionary adjoint identity", std::abs(lhs - rhs) < 1e-9);
  }

  // Modulated codewords hit the power budget exactly.
  {
    const Dictionary A = Dictionary::build(DictionaryKind::gaussian, 24, 32, RngStream(9, 0));
    RngStream rng(9, 1);
    bool ok = true;
    for (int i = 0; i < 50; ++i) {
      SupportVector v;
      v.Q = 8;
      for (int l = 0; l < 4; ++l)
        v.sections.push_back(static_cast<std::uint32_t>(rng.uniform_below(8)));
      const double p = 0.25 + 2.0 * rng.uniform01();
      ok &= std::abs(modulate(A, v, p).squared_norm() / p - 1.0) < 1e-10;
    }
    all &= report(out, "codeword power budget", ok);
  }

  // Section/bit bridges invert each other on factorized tables.
  {
    RngStream rng(11, 0);
    SectionPosterior table(3, 8);
    BitBeliefs bb;
    bb.llrs.resize(9);
    for (double& l : bb.llrs) l = 4.0 * (rng.uniform01() - 0.5);
    table = bit_llrs_to_section_priors(bb, 3, 3);
    const BitBeliefs back = sections_to_bit_llrs(table);
    bool ok = true;
    for (std::size_t j = 0; j < bb.llrs.size(); ++j)
      ok &= std::abs(back.llrs[j] - bb.llrs[j]) < 1e-9;
    all &= report(out, "section/bit bridge round-trip", ok);
  }

  // Outer code: encode -> zero syndrome, extract -> message.
  {
    const LdpcCode code = LdpcCode::build_regular(64, 32, 5);
    RngStream rng(5, 3);
    bool ok = !code.has_four_cycles();
    for (int i = 0; i < 20; ++i) {
      BitVec msg(32);
      for (auto& b : msg) b = static_cast<std::uint8_t>(rng.next_u64() & 1);
      const BitVec word = code.encode(msg);
      ok &= code.check_validity(word) && code.extract_message(word) == msg;
    }
    all &= report(out, "outer code encode/syndrome", ok);
  }

  // Genie subtraction of the true contributions leaves only noise.
  {
    SystemConfig cfg;
    cfg.K_active = 4;
    cfg.M = 8;
    cfg.T = 64;
    cfg.L = 4;
    cfg.Q = 16;
    cfg.B = 6;
    cfg.n_out = 16;
    const ScenarioContext ctx = make_context(cfg);
    RngStream rng(cfg.seed, 0);
    std::vector<BitVec> msgs;
    SupportMatrix C;
    for (std::size_t k = 0; k < cfg.K_active; ++k) {
      BitVec msg(cfg.B);
      for (auto& b : msg) b = static_cast<std::uint8_t>(rng.next_u64() & 1);
      BitVec word = ctx.code.encode(msg);
      word.resize(cfg.L * ctx.config.m, 0);
      C.columns.push_back(encode_sections(word, cfg.L, ctx.config.m));
      msgs.push_back(std::move(msg));
    }
    const ComplexMatrix H = draw_channels(cfg.K_active, cfg.M, rng);
    const Observation obs = synthesize(ctx.dictionary, C, H, 0.0, cfg.P, rng);
    DecodedSet genie;
    for (std::size_t k = 0; k < cfg.K_active; ++k) {
      DecodedEntry e;
      e.message = msgs[k];
      e.support = C.columns[k];
      e.channel.assign(H.row(k).begin(), H.row(k).end());
      genie.entries.push_back(std::move(e));
    }
    const ComplexMatrix resid = sic_subtract(obs.Y, ctx.dictionary, genie, cfg.P);
    all &= report(out, "genie interference cancellation", resid.frobenius_norm() < 1e-9);
  }

  // Channel posterior closed form.
  {
    bool ok = true;
    RngStream rng(13, 0);
    for (int i = 0; i < 100; ++i) {
      const double vr = 0.01 + 5.0 * rng.uniform01();
      const cplx mr = rng.cnormal();
      const cplx mh = mr / (vr + 1.0);
      ok &= std::abs(mh * (vr + 1.0) - mr) < 1e-12;
      ok &= vr / (vr + 1.0) < std::min(1.0, vr);
    }
    all &= report(out, "channel posterior closed form", ok);
  }

  out << (all ? "selftest: all checks passed" : "selftest: FAILURES above") << "\n";
  return all;
}

}  // namespace urasim
