#include "urasim/ldpc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "urasim/rng.hpp"

namespace urasim {

namespace {

constexpr std::size_t kColumnWeight = 3;
constexpr std::size_t kConstructionAttempts = 64;

double clamp_llr(double v) { return std::clamp(v, -kLlrClamp, kLlrClamp); }

// log(1 + exp(x)) without overflow.
double log1pexp(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

// Progressive edge growth with column weight 3: every new edge goes to
// the lowest-degree check that avoids parallel edges and, when possible,
// 4-cycles. Dense high-rate graphs where girth 6 is combinatorially out
// of reach degrade gracefully (the unavoidable short cycles stay and are
// reported by has_four_cycles()).
std::vector<std::vector<std::uint32_t>> peg_graph(std::size_t n, std::size_t r,
                                                  RngStream& rng) {
  std::vector<std::vector<std::uint32_t>> row_cols(r);   // check -> columns
  std::vector<std::vector<std::uint32_t>> col_rows(n);   // column -> checks
  std::vector<std::size_t> degree(r, 0);

  std::vector<char> blocked(r);
  std::vector<std::uint32_t> candidates;
  // Edges are placed in rounds (first edge of every column, then the
  // second, ...) which keeps check degrees balanced while the graph is
  // still sparse enough to dodge short cycles.
  for (std::size_t w = 0; w < kColumnWeight; ++w) {
    for (std::uint32_t c = 0; c < n; ++c) {
      // blocked: already adjacent to c, or sharing another column with an
      // already-chosen check of c (which would close a 4-cycle).
      std::fill(blocked.begin(), blocked.end(), 0);
      for (const std::uint32_t row : col_rows[c]) {
        blocked[row] = 1;
        for (const std::uint32_t c2 : row_cols[row])
          if (c2 != c)
            for (const std::uint32_t row2 : col_rows[c2]) blocked[row2] = 1;
      }

      const auto collect = [&](bool respect_blocked) {
        candidates.clear();
        std::size_t best = SIZE_MAX;
        for (std::uint32_t row = 0; row < r; ++row) {
          if (respect_blocked && blocked[row]) continue;
          if (!respect_blocked) {
            bool adjacent = false;
            for (const std::uint32_t have : col_rows[c]) adjacent |= (have == row);
            if (adjacent) continue;
          }
          if (degree[row] < best) {
            best = degree[row];
            candidates.clear();
          }
          if (degree[row] == best) candidates.push_back(row);
        }
      };

      collect(true);
      if (candidates.empty()) collect(false);  // 4-cycle unavoidable here
      if (candidates.empty())
        throw DegenerateError("ldpc: no check available for column " + std::to_string(c));
      const std::uint32_t row =
          candidates[rng.uniform_below(candidates.size())];
      row_cols[row].push_back(c);
      col_rows[c].push_back(row);
      ++degree[row];
    }
  }
  for (auto& v : row_cols) std::sort(v.begin(), v.end());
  return row_cols;
}

}  // namespace

void LdpcCode::build_edges() {
  const std::size_t r = check_vars_.size();
  check_offset_.assign(r + 1, 0);
  edge_var_.clear();
  var_edges_.assign(n_, {});
  for (std::size_t i = 0; i < r; ++i) {
    check_offset_[i] = edge_var_.size();
    for (const std::uint32_t v : check_vars_[i]) {
      var_edges_[v].push_back(static_cast<std::uint32_t>(edge_var_.size()));
      edge_var_.push_back(v);
    }
  }
  check_offset_[r] = edge_var_.size();
}

bool LdpcCode::build_generator() {
  const std::size_t r = check_vars_.size();
  const std::size_t words = (n_ + 63) / 64;
  std::vector<std::vector<std::uint64_t>> h(r, std::vector<std::uint64_t>(words, 0));
  for (std::size_t i = 0; i < r; ++i)
    for (const std::uint32_t v : check_vars_[i]) h[i][v / 64] ^= (1ULL << (v % 64));

  const auto get = [&](const std::vector<std::uint64_t>& row, std::size_t c) {
    return (row[c / 64] >> (c % 64)) & 1ULL;
  };

  // Gauss-Jordan, pivoting from the highest column down so message bits
  // land on the lowest-index columns.
  pivot_cols_.clear();
  std::vector<char> row_used(r, 0);
  std::vector<std::size_t> pivot_row_of;
  std::vector<std::uint32_t> pivot_col_of;
  for (std::size_t cc = 0; cc < n_ && pivot_col_of.size() < r; ++cc) {
    const std::size_t c = n_ - 1 - cc;
    std::size_t pr = r;
    for (std::size_t i = 0; i < r; ++i)
      if (!row_used[i] && get(h[i], c)) {
        pr = i;
        break;
      }
    if (pr == r) continue;
    row_used[pr] = 1;
    for (std::size_t i = 0; i < r; ++i) {
      if (i == pr || !get(h[i], c)) continue;
      for (std::size_t w = 0; w < words; ++w) h[i][w] ^= h[pr][w];
    }
    pivot_row_of.push_back(pr);
    pivot_col_of.push_back(static_cast<std::uint32_t>(c));
  }
  if (pivot_col_of.size() != r) return false;

  std::vector<char> is_pivot(n_, 0);
  for (const std::uint32_t c : pivot_col_of) is_pivot[c] = 1;
  info_cols_.clear();
  for (std::uint32_t c = 0; c < n_; ++c)
    if (!is_pivot[c]) info_cols_.push_back(c);
  k_ = info_cols_.size();

  // Per pivot: the info columns appearing in its (fully reduced) row,
  // packed as a k-bit mask in info_cols_ order.
  const std::size_t kwords = (k_ + 63) / 64;
  pivot_cols_.assign(r, 0);
  parity_of_info_.assign(r, std::vector<std::uint64_t>(kwords, 0));
  for (std::size_t p = 0; p < r; ++p) {
    const std::size_t row = pivot_row_of[p];
    pivot_cols_[p] = pivot_col_of[p];
    for (std::size_t j = 0; j < k_; ++j)
      if (get(h[row], info_cols_[j])) parity_of_info_[p][j / 64] ^= (1ULL << (j % 64));
  }
  return true;
}

LdpcCode LdpcCode::build_regular(std::size_t n, std::size_t k, std::uint64_t seed,
                                 std::size_t max_bp_iters) {
  if (k < 1 || n <= k) throw DimensionError("ldpc: need 1 <= k < n");
  const std::size_t r = n - k;
  if (kColumnWeight * n < r) throw DimensionError("ldpc: too many checks for column weight 3");

  // Keep the full-rank attempt with the fewest 4-cycles; zero is usually
  // reached quickly except for rates where girth 6 is impossible.
  LdpcCode best;
  std::size_t best_cycles = SIZE_MAX;
  for (std::size_t attempt = 0; attempt < kConstructionAttempts; ++attempt) {
    RngStream rng(seed, 0xC0DE0000ULL + attempt);
    LdpcCode code;
    code.n_ = n;
    code.max_bp_iters_ = max_bp_iters;
    code.check_vars_ = peg_graph(n, r, rng);
    if (!code.build_generator()) continue;
    if (code.k_ != k) continue;  // full rank gives exactly k; anything else retry
    const std::size_t cycles = code.count_four_cycles();
    if (cycles < best_cycles) {
      best_cycles = cycles;
      best = std::move(code);
      if (best_cycles == 0) break;
    }
  }
  if (best_cycles == SIZE_MAX)
    throw DegenerateError("ldpc: construction failed for n = " + std::to_string(n) +
                          ", k = " + std::to_string(k));
  best.build_edges();
  return best;
}

BitVec LdpcCode::encode(const BitVec& message) const {
  if (message.size() != k_)
    throw LengthError("encode: message has " + std::to_string(message.size()) +
                      " bits, expected k = " + std::to_string(k_));
  BitVec word(n_, 0);
  const std::size_t kwords = (k_ + 63) / 64;
  std::vector<std::uint64_t> msg(kwords, 0);
  for (std::size_t j = 0; j < k_; ++j) {
    word[info_cols_[j]] = message[j] & 1;
    if (message[j] & 1) msg[j / 64] ^= (1ULL << (j % 64));
  }
  for (std::size_t p = 0; p < pivot_cols_.size(); ++p) {
    std::uint64_t acc = 0;
    for (std::size_t w = 0; w < kwords; ++w) acc ^= (parity_of_info_[p][w] & msg[w]);
    word[pivot_cols_[p]] = static_cast<std::uint8_t>(std::popcount(acc) & 1);
  }
  return word;
}

BitVec LdpcCode::extract_message(const BitVec& codeword) const {
  if (codeword.size() < n_) throw LengthError("extract_message: word shorter than n");
  BitVec msg(k_);
  for (std::size_t j = 0; j < k_; ++j) msg[j] = codeword[info_cols_[j]] & 1;
  return msg;
}

bool LdpcCode::check_validity(const BitVec& word) const {
  if (word.size() < n_) throw LengthError("check_validity: word shorter than n");
  for (const auto& vars : check_vars_) {
    std::uint8_t parity = 0;
    for (const std::uint32_t v : vars) parity ^= (word[v] & 1);
    if (parity) return false;
  }
  return true;
}

LdpcCode::SisoResult LdpcCode::siso_decode(const BitBeliefs& channel_llrs) const {
  if (channel_llrs.llrs.size() < n_)
    throw LengthError("siso_decode: need at least n = " + std::to_string(n_) + " LLRs");

  SisoResult res;
  std::vector<double> prior(n_);
  for (std::size_t v = 0; v < n_; ++v) prior[v] = clamp_llr(channel_llrs.llrs[v]);

  std::vector<double> posterior = prior;
  const auto hard_of = [&](const std::vector<double>& llr) {
    BitVec bits(n_);
    for (std::size_t v = 0; v < n_; ++v) bits[v] = llr[v] < 0.0 ? 1 : 0;
    return bits;
  };

  res.hard = hard_of(posterior);
  if (check_validity(res.hard)) {
    res.valid = true;
    res.iterations = 1;  // syndrome already clean, no message passing needed
    res.posterior.llrs = posterior;
    res.extrinsic.llrs.assign(n_, 0.0);
    return res;
  }

  const std::size_t E = edge_var_.size();
  std::vector<double> v2c(E), c2v(E, 0.0);
  for (std::size_t e = 0; e < E; ++e) v2c[e] = prior[edge_var_[e]];

  std::vector<double> fwd, bwd;
  for (std::size_t iter = 1; iter <= max_bp_iters_; ++iter) {
    res.iterations = iter;
    // Check update: tanh product with forward/backward exclusion.
    for (std::size_t i = 0; i < check_vars_.size(); ++i) {
      const std::size_t beg = check_offset_[i], end = check_offset_[i + 1];
      const std::size_t deg = end - beg;
      fwd.resize(deg);
      bwd.resize(deg);
      for (std::size_t j = 0; j < deg; ++j) {
        const double t = std::tanh(0.5 * v2c[beg + j]);
        fwd[j] = (j == 0) ? t : fwd[j - 1] * t;
      }
      for (std::size_t j = deg; j-- > 0;) {
        const double t = std::tanh(0.5 * v2c[beg + j]);
        bwd[j] = (j + 1 == deg) ? t : bwd[j + 1] * t;
      }
      for (std::size_t j = 0; j < deg; ++j) {
        double prod = 1.0;
        if (j > 0) prod *= fwd[j - 1];
        if (j + 1 < deg) prod *= bwd[j + 1];
        prod = std::clamp(prod, -(1.0 - 1e-12), 1.0 - 1e-12);
        c2v[beg + j] = clamp_llr(2.0 * std::atanh(prod));
      }
    }
    // Variable update.
    for (std::size_t v = 0; v < n_; ++v) {
      double total = prior[v];
      for (const std::uint32_t e : var_edges_[v]) total += c2v[e];
      posterior[v] = total;
      for (const std::uint32_t e : var_edges_[v]) v2c[e] = clamp_llr(total - c2v[e]);
    }
    res.hard = hard_of(posterior);
    if (check_validity(res.hard)) {
      res.valid = true;
      break;
    }
  }

  res.posterior.llrs.resize(n_);
  res.extrinsic.llrs.resize(n_);
  for (std::size_t v = 0; v < n_; ++v) {
    res.posterior.llrs[v] = clamp_llr(posterior[v]);
    res.extrinsic.llrs[v] = clamp_llr(posterior[v] - prior[v]);
  }
  return res;
}

std::size_t LdpcCode::count_four_cycles() const {
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::size_t cycles = 0;
  for (const auto& vars : check_vars_)
    for (std::size_t i = 0; i < vars.size(); ++i)
      for (std::size_t j = i + 1; j < vars.size(); ++j)
        if (!seen.insert({vars[i], vars[j]}).second) ++cycles;
  return cycles;
}

bool LdpcCode::has_four_cycles() const { return count_four_cycles() > 0; }

void LdpcCode::save_alist(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  const std::size_t r = check_vars_.size();
  std::vector<std::vector<std::uint32_t>> col_rows(n_);
  for (std::size_t i = 0; i < r; ++i)
    for (const std::uint32_t v : check_vars_[i]) col_rows[v].push_back(static_cast<std::uint32_t>(i));
  std::size_t max_col = 0, max_row = 0;
  for (const auto& v : col_rows) max_col = std::max(max_col, v.size());
  for (const auto& v : check_vars_) max_row = std::max(max_row, v.size());

  out << n_ << " " << r << "\n" << max_col << " " << max_row << "\n";
  for (std::size_t c = 0; c < n_; ++c) out << col_rows[c].size() << (c + 1 < n_ ? " " : "\n");
  for (std::size_t i = 0; i < r; ++i)
    out << check_vars_[i].size() << (i + 1 < r ? " " : "\n");
  for (std::size_t c = 0; c < n_; ++c) {
    for (std::size_t j = 0; j < max_col; ++j)
      out << (j < col_rows[c].size() ? col_rows[c][j] + 1 : 0) << (j + 1 < max_col ? " " : "\n");
  }
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < max_row; ++j)
      out << (j < check_vars_[i].size() ? check_vars_[i][j] + 1 : 0)
          << (j + 1 < max_row ? " " : "\n");
  }
  if (!out) throw IoError("short write: " + path);
}

LdpcCode LdpcCode::from_alist(const std::string& path, std::size_t max_bp_iters) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::size_t n = 0, r = 0, max_col = 0, max_row = 0;
  if (!(in >> n >> r >> max_col >> max_row)) throw IoError("bad alist header: " + path);
  std::vector<std::size_t> col_deg(n), row_deg(r);
  for (auto& d : col_deg) in >> d;
  for (auto& d : row_deg) in >> d;
  // Column lists are redundant with the row lists; skip them.
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t j = 0; j < max_col; ++j) {
      long v;
      in >> v;
    }
  LdpcCode code;
  code.n_ = n;
  code.max_bp_iters_ = max_bp_iters;
  code.check_vars_.assign(r, {});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < max_row; ++j) {
      long v;
      if (!(in >> v)) throw IoError("truncated alist: " + path);
      if (v > 0) code.check_vars_[i].push_back(static_cast<std::uint32_t>(v - 1));
    }
    std::sort(code.check_vars_[i].begin(), code.check_vars_[i].end());
    if (code.check_vars_[i].size() != row_deg[i])
      throw IoError("alist row degree mismatch: " + path);
  }
  if (!code.build_generator())
    throw DegenerateError("alist parity matrix is rank deficient: " + path);
  code.build_edges();
  return code;
}

BitBeliefs sections_to_bit_llrs(const SectionPosterior& post) {
  const std::size_t L = post.sections(), Q = post.section_size();
  std::size_t m = 0;
  while ((std::size_t{1} << m) < Q) ++m;
  BitBeliefs bb;
  bb.llrs.assign(L * m, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t j = 0; j < m; ++j) {
      double p0 = 0.0, p1 = 0.0;
      for (std::size_t q = 0; q < Q; ++q) {
        const bool bit = (q >> (m - 1 - j)) & 1;
        (bit ? p1 : p0) += post(l, q);
      }
      p0 = std::max(p0, kProbFloor);
      p1 = std::max(p1, kProbFloor);
      bb.llrs[l * m + j] = clamp_llr(std::log(p0) - std::log(p1));
    }
  }
  return bb;
}

SectionPosterior bit_llrs_to_section_priors(const BitBeliefs& bb, std::size_t L, std::size_t m) {
  if (bb.llrs.size() != L * m)
    throw LengthError("bit_llrs_to_section_priors: got " + std::to_string(bb.llrs.size()) +
                      " LLRs, expected L*m = " + std::to_string(L * m));
  const std::size_t Q = std::size_t{1} << m;
  SectionPosterior out(L, Q);
  std::vector<double> logp(Q);
  for (std::size_t l = 0; l < L; ++l) {
    double lse_max = -1e300;
    for (std::size_t q = 0; q < Q; ++q) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double llr = clamp_llr(bb.llrs[l * m + j]);
        const bool bit = (q >> (m - 1 - j)) & 1;
        // log Pr(bit value) from the LLR, stable at both extremes.
        s += bit ? -log1pexp(llr) : -log1pexp(-llr);
      }
      logp[q] = s;
      lse_max = std::max(lse_max, s);
    }
    double norm = 0.0;
    for (std::size_t q = 0; q < Q; ++q) norm += std::exp(logp[q] - lse_max);
    for (std::size_t q = 0; q < Q; ++q) out(l, q) = std::exp(logp[q] - lse_max) / norm;
  }
  return out;
}

}  // namespace urasim
