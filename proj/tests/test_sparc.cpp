#include <doctest.h>

#include <cmath>

#include "urasim/rng.hpp"
#include "urasim/sparc.hpp"

using namespace urasim;

namespace {

BitVec random_bits(std::size_t n, RngStream& rng) {
  BitVec b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng.next_u64() & 1);
  return b;
}

}  // namespace

TEST_CASE("encode_sections maps big-endian chunks to indices") {
  const SupportVector v = encode_sections({0, 0, 0, 1}, 2, 2);
  CHECK(v.sections == std::vector<std::uint32_t>{0, 1});
  CHECK(v.dense() == std::vector<std::uint8_t>{1, 0, 0, 0, 0, 1, 0, 0});

  const SupportVector zeros = encode_sections(BitVec(6, 0), 3, 2);
  for (const auto s : zeros.sections) CHECK(s == 0);

  const SupportVector ones = encode_sections(BitVec(6, 1), 3, 2);
  for (const auto s : ones.sections) CHECK(s == 3);
}

TEST_CASE("encode_sections rejects wrong lengths") {
  CHECK_THROWS_AS(encode_sections(BitVec(5, 0), 2, 2), LengthError);
}

TEST_CASE("paper-scale sections carry exactly L ones") {
  RngStream rng(1, 0);
  const BitVec bits = random_bits(14 * 8, rng);
  const SupportVector v = encode_sections(bits, 14, 8);
  const auto dense = v.dense();
  CHECK(dense.size() == 3584);
  std::size_t ones = 0;
  for (const auto b : dense) ones += b;
  CHECK(ones == 14);
}

TEST_CASE("decode_sections inverts encode_sections") {
  RngStream rng(2, 0);
  for (int rep = 0; rep < 1000; ++rep) {
    const BitVec bits = random_bits(4 * 3, rng);
    CHECK(decode_sections(encode_sections(bits, 4, 3)) == bits);
  }
}

TEST_CASE("exhaustive bijection for small section layouts") {
  // Whole space for a few (L, m) with L*m <= 12.
  for (const auto [L, m] : {std::pair<std::size_t, std::size_t>{2, 2},
                            {3, 4},
                            {6, 2},
                            {12, 1}}) {
    const std::size_t bits = L * m;
    for (std::size_t word = 0; word < (std::size_t{1} << bits); ++word) {
      BitVec b(bits);
      for (std::size_t j = 0; j < bits; ++j)
        b[j] = static_cast<std::uint8_t>((word >> (bits - 1 - j)) & 1);
      const SupportVector v = encode_sections(b, L, m);
      REQUIRE(decode_sections(v) == b);
    }
  }
}

TEST_CASE("dense view and from_dense are mutual inverses") {
  RngStream rng(3, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const BitVec bits = random_bits(3 * 3, rng);
    const SupportVector v = encode_sections(bits, 3, 3);
    CHECK(SupportVector::from_dense(v.dense(), 3, 8) == v);
  }
  CHECK_THROWS_AS(SupportVector::from_dense(std::vector<std::uint8_t>(8, 1), 2, 4),
                  DimensionError);
}

TEST_CASE("modulate hits the power budget") {
  const auto dict = Dictionary::build(DictionaryKind::gaussian, 16, 32, RngStream(5, 0));
  RngStream rng(6, 0);

  SUBCASE("single active column with unit-norm dictionary") {
    SupportVector v;
    v.Q = 32;
    v.sections = {13};
    const ComplexMatrix s = modulate(dict, v, 2.0);
    CHECK(s.squared_norm() == doctest::Approx(2.0).epsilon(1e-12));
    // One selected column: s = sqrt(P) a_n.
    for (std::size_t t = 0; t < 16; ++t)
      CHECK(std::abs(s(t, 0) - std::sqrt(2.0) * dict.matrix()(t, 13)) < 1e-12);
  }

  SUBCASE("zero power gives the zero signal") {
    SupportVector v;
    v.Q = 8;
    v.sections = {1, 2, 3, 4};
    CHECK(modulate(dict, v, 0.0).frobenius_norm() == 0.0);
  }

  SUBCASE("random supports, a thousand draws") {
    for (int rep = 0; rep < 1000; ++rep) {
      SupportVector v;
      v.Q = 8;
      for (int l = 0; l < 4; ++l)
        v.sections.push_back(static_cast<std::uint32_t>(rng.uniform_below(8)));
      const double P = 0.1 + 4.0 * rng.uniform01();
      CHECK(modulate(dict, v, P).squared_norm() / P == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("hard_decision takes the per-section argmax with low-index ties") {
  SectionPosterior post(3, 4);
  post(0, 0) = 0.1;
  post(0, 1) = 0.7;
  post(0, 2) = 0.1;
  post(0, 3) = 0.1;
  // Row 1 stays uniform: tie resolves to index 0.
  post(2, 0) = 0.0;
  post(2, 1) = 0.0;
  post(2, 2) = 0.0;
  post(2, 3) = 1.0;
  const SupportVector v = hard_decision(post);
  CHECK(v.sections == std::vector<std::uint32_t>{1, 0, 3});
}
