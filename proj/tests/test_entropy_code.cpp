#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "nncomp/analyze.hpp"
#include "nncomp/entropy_code.hpp"
#include "nncomp/quantize.hpp"
#include "oracles.hpp"

using namespace nncomp;

namespace {

std::vector<std::uint32_t> random_indices(Rng& rng, std::size_t n, std::uint32_t k) {
  std::vector<std::uint32_t> v(n);
  for (auto& x : v) x = static_cast<std::uint32_t>(rng.below(k));
  return v;
}

// Skewed draw so Huffman lengths vary.
std::vector<std::uint32_t> geometric_indices(Rng& rng, std::size_t n, std::uint32_t k, double p) {
  std::vector<std::uint32_t> v(n);
  for (auto& x : v) {
    std::uint32_t s = 0;
    while (s + 1 < k && rng.uniform() > p) ++s;
    x = s;
  }
  return v;
}

}  // namespace

TEST_CASE("fixed-length packing is MSB first") {
  const std::vector<std::uint32_t> idx{1, 2, 3};
  const auto bs = encode_fixed(idx, 4);
  CHECK(bs.bytes == std::vector<std::uint8_t>{0x12, 0x30});
  CHECK(bs.bit_length == 12);
  CHECK(decode_fixed(bs, 4, 3) == idx);
}

TEST_CASE("fixed-length edge cases") {
  const auto empty = encode_fixed(std::vector<std::uint32_t>{}, 4);
  CHECK(empty.bytes.empty());
  CHECK(empty.bit_length == 0);
  CHECK(decode_fixed(empty, 4, 0).empty());
  CHECK_THROWS_AS(encode_fixed(std::vector<std::uint32_t>{16}, 4), ArgumentError);
  CHECK_THROWS_AS(encode_fixed(std::vector<std::uint32_t>{0}, 0), ArgumentError);
  CHECK_THROWS_AS(encode_fixed(std::vector<std::uint32_t>{0}, 17), ArgumentError);
  auto bs = encode_fixed(std::vector<std::uint32_t>{1, 2, 3}, 4);
  CHECK_THROWS_AS(decode_fixed(bs, 4, 4), CorruptionError);
  bs.bit_length = 7;
  bs.bytes.resize(1);
  CHECK_THROWS_AS(decode_fixed(bs, 4, 2), CorruptionError);
}

TEST_CASE("fixed-length round trips at every width") {
  Rng rng(1);
  for (int w = 1; w <= 16; ++w) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto n = static_cast<std::size_t>(rng.below(300));
      const auto idx = random_indices(rng, n, 1U << w);
      const auto bs = encode_fixed(idx, w);
      CHECK(bs.bit_length == n * static_cast<std::size_t>(w));
      CHECK(bs.bytes.size() == (n * static_cast<std::size_t>(w) + 7) / 8);
      CHECK_NOTHROW(validate(bs));
      CHECK(decode_fixed(bs, w, n) == idx);
    }
  }
}

TEST_CASE("bitstream validation") {
  CHECK_THROWS_AS(validate(Bitstream{{0x00}, 9}), CorruptionError);
  CHECK_THROWS_AS(validate(Bitstream{{0x00, 0x00}, 8}), CorruptionError);
  CHECK_THROWS_AS(validate(Bitstream{{0x01}, 4}), CorruptionError);
  CHECK_NOTHROW(validate(Bitstream{{0x10}, 4}));
}

TEST_CASE("Huffman code lengths") {
  CHECK(build_huffman(Histogram{1, 1}).code_lengths == std::vector<std::uint8_t>{1, 1});
  const Histogram h{5, 2, 1, 1};
  const auto t = build_huffman(h);
  CHECK(t.code_lengths == std::vector<std::uint8_t>{1, 2, 3, 3});
  CHECK_FALSE(t.length_limited);
  const double rate = static_cast<double>(coded_bits(t, h)) / 9.0;
  CHECK(rate == doctest::Approx(15.0 / 9.0).epsilon(1e-12));
  const double H = -(5.0 / 9 * std::log2(5.0 / 9) + 2.0 / 9 * std::log2(2.0 / 9) + 2.0 / 9 * std::log2(1.0 / 9));
  CHECK(empirical_entropy(h) == doctest::Approx(H).epsilon(1e-12));
  CHECK(rate >= empirical_entropy(h));
  const auto one = build_huffman(Histogram{0, 0, 4});
  CHECK(one.code_lengths == std::vector<std::uint8_t>{0, 0, 1});
  CHECK(coded_bits(one, Histogram{0, 0, 4}) == 4);
  CHECK_THROWS_AS(build_huffman(Histogram{0, 0}), ArgumentError);
}

TEST_CASE("canonical codes follow (length, symbol) order") {
  const HuffmanTable t{{3, 1, 3, 2}, false};
  CHECK(canonical_codes(t) == std::vector<std::uint32_t>{0b110, 0b0, 0b111, 0b10});
}

TEST_CASE("Huffman is optimal against the two-queue oracle") {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const auto k = static_cast<std::size_t>(1 + rng.below(100));
    Histogram h(k);
    for (auto& c : h.counts) c = rng.below(3) == 0 ? 0 : 1 + rng.below(rng.below(2) ? 10 : 100000);
    if (h.total() == 0) h.counts[k - 1] = 3;
    const auto t = build_huffman(h);
    CHECK_NOTHROW(validate(t));
    const std::size_t present = static_cast<std::size_t>(std::count_if(h.counts.begin(), h.counts.end(), [](auto c) { return c > 0; }));
    if (present > 1 && !t.length_limited) CHECK(coded_bits(t, h) == oracle::huffman_cost(h.counts));
    // Construction is deterministic.
    CHECK(build_huffman(h) == t);
  }
}

TEST_CASE("Huffman round trips over random tables") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto k = static_cast<std::uint32_t>(1 + rng.below(64));
    const auto idx = geometric_indices(rng, 1 + rng.below(2000), k, rng.uniform(0.05, 0.9));
    const auto h = Histogram::of<std::uint32_t>(idx, k);
    const auto t = build_huffman(h);
    const auto bs = encode_huffman(idx, t);
    CHECK(bs.bit_length == coded_bits(t, h));
    CHECK_NOTHROW(validate(bs));
    // Decoding uses a table rebuilt from the lengths alone.
    const HuffmanTable rebuilt{t.code_lengths, false};
    CHECK(decode_huffman(bs, rebuilt, idx.size()) == idx);
    // Payload never exceeds the fixed-length payload.
    const int width = std::max(1, static_cast<int>(std::ceil(std::log2(static_cast<double>(k)))));
    CHECK(bs.bit_length <= idx.size() * static_cast<std::size_t>(width));
  }
}

TEST_CASE("uniform distribution over 16 symbols costs 4 bits") {
  std::vector<std::uint32_t> idx;
  for (int r = 0; r < 50; ++r)
    for (std::uint32_t s = 0; s < 16; ++s) idx.push_back(s);
  const auto t = build_huffman(Histogram::of<std::uint32_t>(idx, 16));
  CHECK(encode_huffman(idx, t).bit_length == encode_fixed(idx, 4).bit_length);
}

TEST_CASE("Huffman errors") {
  const HuffmanTable t{{1, 1, 0}, false};
  CHECK_THROWS_AS(encode_huffman(std::vector<std::uint32_t>{2}, t), ArgumentError);
  CHECK_THROWS_AS(encode_huffman(std::vector<std::uint32_t>{5}, t), ArgumentError);
  const auto bs = encode_huffman(std::vector<std::uint32_t>{0, 1, 1}, t);
  CHECK_THROWS_AS(decode_huffman(bs, t, 4), CorruptionError);
  // Incomplete code: "11" is not a codeword.
  const HuffmanTable partial{{1, 2, 0}, false};
  CHECK_THROWS_AS(decode_huffman(Bitstream{{0xC0}, 2}, partial, 1), CorruptionError);
  CHECK_THROWS_AS(validate(HuffmanTable{{1, 1, 1}, false}), CorruptionError);
  CHECK_THROWS_AS(validate(HuffmanTable{{0, 0}, false}), CorruptionError);
  CHECK_THROWS_AS(validate(HuffmanTable{{17, 1}, false}), CorruptionError);
}

TEST_CASE("lengths are capped at 16 only when exceeded") {
  // Fibonacci weights give a maximally deep optimal tree.
  Histogram h(30);
  std::uint64_t a = 1, b = 1;
  for (auto& c : h.counts) {
    c = a;
    const auto n = a + b;
    a = b;
    b = n;
  }
  const auto t = build_huffman(h);
  CHECK(t.length_limited);
  CHECK(*std::max_element(t.code_lengths.begin(), t.code_lengths.end()) == kMaxCodeLength);
  CHECK_NOTHROW(validate(t));
  // Still optimal among length-limited codes: no worse than the brute bound
  // and no better than unconstrained Huffman.
  CHECK(coded_bits(t, h) >= oracle::huffman_cost(h.counts));
  Rng rng(6);
  std::vector<std::uint32_t> idx;
  for (int i = 0; i < 500; ++i) idx.push_back(static_cast<std::uint32_t>(rng.below(30)));
  CHECK(decode_huffman(encode_huffman(idx, t), t, idx.size()) == idx);

  Histogram shallow(20);
  for (auto& c : shallow.counts) c = 10;
  CHECK_FALSE(build_huffman(shallow).length_limited);
}

TEST_CASE("package-merge matches exhaustive search on small alphabets") {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    Histogram h(k);
    for (auto& c : h.counts) c = 1 + rng.below(50);
    const int L = 2 + static_cast<int>(rng.below(3));
    if ((std::size_t{1} << L) < k) continue;
    const auto lens = limited_code_lengths(h, L);
    std::uint64_t got = 0;
    for (std::size_t i = 0; i < k; ++i) got += h.counts[i] * lens[i];
    // Exhaustive search over length vectors in [1, L] satisfying Kraft.
    std::uint64_t best = UINT64_MAX;
    std::vector<int> cur(k, 1);
    while (true) {
      double kraft = 0.0;
      std::uint64_t cost = 0;
      for (std::size_t i = 0; i < k; ++i) {
        kraft += std::ldexp(1.0, -cur[i]);
        cost += h.counts[i] * static_cast<std::uint64_t>(cur[i]);
      }
      if (kraft <= 1.0) best = std::min(best, cost);
      std::size_t p = 0;
      while (p < k && cur[p] == L) cur[p++] = 1;
      if (p == k) break;
      ++cur[p];
    }
    CHECK(got == best);
  }
}

TEST_CASE("4-bit Lloyd-Max indices of Laplace weights compress with Huffman") {
  const auto x = testutil::laplace_values(3, 200'000, 0.05);
  const auto q = train_lloyd_max(x, 16);
  const auto it = sq_encode(q, Tensor({static_cast<std::int64_t>(x.size())}, x));
  const auto h = Histogram::of<std::uint32_t>(it.indices, 16);
  const auto vlc = encode_huffman(it.indices, build_huffman(h)).bit_length;
  const auto flc = encode_fixed(it.indices, 4).bit_length;
  CHECK(vlc < flc);
  MESSAGE("VLC saving " << 100.0 * (1.0 - double(vlc) / double(flc)) << "%");
}
