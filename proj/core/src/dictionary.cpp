#include "urasim/dictionary.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numeric>

#ifdef URASIM_HAVE_FFTW
#include <fftw3.h>
#endif

namespace urasim {

namespace {
constexpr char kMagic[8] = {'U', 'R', 'A', 'D', 'I', 'C', 'T', '1'};
constexpr double kTwoPi = 6.28318530717958647692;

static_assert(std::endian::native == std::endian::little,
              "dictionary dump format assumes a little-endian host");
}  // namespace

struct Dictionary::FftPlans {
#ifdef URASIM_HAVE_FFTW
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  std::size_t n = 0;

  // FFTW planning is not thread-safe; execution via fftw_execute_dft is.
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  explicit FftPlans(std::size_t n_points) : n(n_points) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    std::vector<cplx> in(n), out(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                           reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD, flags);
    bwd = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                           reinterpret_cast<fftw_complex*>(out.data()), FFTW_BACKWARD, flags);
  }
  ~FftPlans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
  void run_fwd(cplx* in, cplx* out) const {
    fftw_execute_dft(fwd, reinterpret_cast<fftw_complex*>(in),
                     reinterpret_cast<fftw_complex*>(out));
  }
  void run_bwd(cplx* in, cplx* out) const {
    fftw_execute_dft(bwd, reinterpret_cast<fftw_complex*>(in),
                     reinterpret_cast<fftw_complex*>(out));
  }
#else
  explicit FftPlans(std::size_t) {}
#endif
};

Dictionary Dictionary::build(DictionaryKind kind, std::size_t T, std::size_t N, RngStream rng) {
  if (T < 1 || N < 1) throw DimensionError("dictionary: T and N must be >= 1");
  if (kind == DictionaryKind::subsampled_dft && T > N)
    throw DimensionError("subsampled_dft: T = " + std::to_string(T) +
                         " exceeds DFT size N = " + std::to_string(N));

  Dictionary d;
  d.kind_ = kind;
  d.seed_ = rng.seed();
  d.stream_ = rng.stream_id();
  d.matrix_ = ComplexMatrix(T, N);

  if (kind == DictionaryKind::gaussian) {
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t n = 0; n < N; ++n) d.matrix_(t, n) = rng.cnormal();
    // Normalize each column to unit l2 norm.
    for (std::size_t n = 0; n < N; ++n) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += std::norm(d.matrix_(t, n));
      if (s == 0.0) throw DegenerateError("gaussian dictionary drew a zero column");
      const double inv = 1.0 / std::sqrt(s);
      for (std::size_t t = 0; t < T; ++t) d.matrix_(t, n) *= inv;
    }
  } else {
    // Uniform row sample of the N-point DFT without replacement
    // (partial Fisher-Yates), kept in ascending order. Entries carry a
    // 1/sqrt(T) scale, which makes every column exactly unit norm.
    std::vector<std::uint32_t> rows(N);
    std::iota(rows.begin(), rows.end(), 0u);
    for (std::size_t i = 0; i < T; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(N - i));
      std::swap(rows[i], rows[j]);
    }
    rows.resize(T);
    std::sort(rows.begin(), rows.end());
    d.dft_rows_ = rows;
    const double scale = 1.0 / std::sqrt(static_cast<double>(T));
    for (std::size_t t = 0; t < T; ++t) {
      const double base = -kTwoPi * static_cast<double>(rows[t]) / static_cast<double>(N);
      for (std::size_t n = 0; n < N; ++n) {
        const double phase = base * static_cast<double>(n);
        d.matrix_(t, n) = cplx{std::cos(phase) * scale, std::sin(phase) * scale};
      }
    }
  }

  d.finalize();
  return d;
}

void Dictionary::finalize() {
  const std::size_t T = matrix_.rows(), N = matrix_.cols();
  column_norms_.assign(N, 0.0);
  entry_abs2_ = RealMatrix(T, N);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < N; ++n) {
      const double a2 = std::norm(matrix_(t, n));
      entry_abs2_(t, n) = a2;
      column_norms_[n] += a2;
    }
  for (double& v : column_norms_) v = std::sqrt(v);
  if (!matrix_.all_finite()) throw NumericalError("dictionary has non-finite entries", 0);

#ifdef URASIM_HAVE_FFTW
  if (kind_ == DictionaryKind::subsampled_dft) fft_ = std::make_shared<FftPlans>(N);
#endif
}

ComplexMatrix Dictionary::forward_dense(const ComplexMatrix& X) const {
  if (X.rows() != N())
    throw DimensionError("forward: X has " + std::to_string(X.rows()) + " rows, expected N = " +
                         std::to_string(N()));
  return matmul(matrix_, X);
}

ComplexMatrix Dictionary::adjoint_dense(const ComplexMatrix& Y) const {
  if (Y.rows() != T())
    throw DimensionError("adjoint: Y has " + std::to_string(Y.rows()) + " rows, expected T = " +
                         std::to_string(T()));
  return adjoint_matmul(matrix_, Y);
}

ComplexMatrix Dictionary::forward(const ComplexMatrix& X) const {
#ifdef URASIM_HAVE_FFTW
  if (fft_) {
    if (X.rows() != N()) throw DimensionError("forward: row count mismatch");
    const std::size_t Tn = T(), Nn = N(), M = X.cols();
    const double scale = 1.0 / std::sqrt(static_cast<double>(Tn));
    ComplexMatrix out(Tn, M);
    std::vector<cplx> in(Nn), spec(Nn);
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t n = 0; n < Nn; ++n) in[n] = X(n, m);
      fft_->run_fwd(in.data(), spec.data());
      for (std::size_t t = 0; t < Tn; ++t) out(t, m) = spec[dft_rows_[t]] * scale;
    }
    return out;
  }
#endif
  return forward_dense(X);
}

ComplexMatrix Dictionary::adjoint(const ComplexMatrix& Y) const {
#ifdef URASIM_HAVE_FFTW
  if (fft_) {
    if (Y.rows() != T()) throw DimensionError("adjoint: row count mismatch");
    const std::size_t Tn = T(), Nn = N(), M = Y.cols();
    const double scale = 1.0 / std::sqrt(static_cast<double>(Tn));
    ComplexMatrix out(Nn, M);
    std::vector<cplx> in(Nn), time(Nn);
    for (std::size_t m = 0; m < M; ++m) {
      std::fill(in.begin(), in.end(), cplx{});
      for (std::size_t t = 0; t < Tn; ++t) in[dft_rows_[t]] = Y(t, m);
      fft_->run_bwd(in.data(), time.data());
      for (std::size_t n = 0; n < Nn; ++n) out(n, m) = time[n] * scale;
    }
    return out;
  }
#endif
  return adjoint_dense(Y);
}

std::vector<cplx> Dictionary::combine_columns(const std::vector<std::uint32_t>& columns) const {
  std::vector<cplx> s(T(), cplx{});
  for (const std::uint32_t n : columns) {
    if (n >= N()) throw DimensionError("combine_columns: column index out of range");
    for (std::size_t t = 0; t < T(); ++t) s[t] += matrix_(t, n);
  }
  return s;
}

void Dictionary::dump(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t kind32 = static_cast<std::uint32_t>(kind_);
  const std::uint64_t T64 = T(), N64 = N();
  out.write(reinterpret_cast<const char*>(&kind32), sizeof(kind32));
  out.write(reinterpret_cast<const char*>(&T64), sizeof(T64));
  out.write(reinterpret_cast<const char*>(&N64), sizeof(N64));
  out.write(reinterpret_cast<const char*>(&seed_), sizeof(seed_));
  out.write(reinterpret_cast<const char*>(&stream_), sizeof(stream_));
  const std::uint64_t n_rows = dft_rows_.size();
  out.write(reinterpret_cast<const char*>(&n_rows), sizeof(n_rows));
  if (n_rows)
    out.write(reinterpret_cast<const char*>(dft_rows_.data()),
              static_cast<std::streamsize>(n_rows * sizeof(std::uint32_t)));
  out.write(reinterpret_cast<const char*>(matrix_.data()),
            static_cast<std::streamsize>(matrix_.size() * sizeof(cplx)));
  if (!out) throw IoError("short write: " + path);
}

Dictionary Dictionary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw IoError("bad dictionary file header: " + path);
  std::uint32_t kind32 = 0;
  std::uint64_t T64 = 0, N64 = 0, seed = 0, stream = 0, n_rows = 0;
  in.read(reinterpret_cast<char*>(&kind32), sizeof(kind32));
  in.read(reinterpret_cast<char*>(&T64), sizeof(T64));
  in.read(reinterpret_cast<char*>(&N64), sizeof(N64));
  in.read(reinterpret_cast<char*>(&seed), sizeof(seed));
  in.read(reinterpret_cast<char*>(&stream), sizeof(stream));
  in.read(reinterpret_cast<char*>(&n_rows), sizeof(n_rows));
  if (!in) throw IoError("truncated dictionary header: " + path);

  Dictionary d;
  d.kind_ = static_cast<DictionaryKind>(kind32);
  d.seed_ = seed;
  d.stream_ = stream;
  d.dft_rows_.resize(n_rows);
  if (n_rows)
    in.read(reinterpret_cast<char*>(d.dft_rows_.data()),
            static_cast<std::streamsize>(n_rows * sizeof(std::uint32_t)));
  d.matrix_ = ComplexMatrix(T64, N64);
  in.read(reinterpret_cast<char*>(d.matrix_.data()),
          static_cast<std::streamsize>(d.matrix_.size() * sizeof(cplx)));
  if (!in) throw IoError("truncated dictionary payload: " + path);
  d.finalize();
  return d;
}

}  // namespace urasim
