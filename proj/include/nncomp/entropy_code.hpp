#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nncomp/analyze.hpp"

namespace nncomp {

/// Bits packed MSB-first; unused trailing bits of the last byte are zero.
struct Bitstream {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bit_length = 0;

  bool operator==(const Bitstream&) const = default;
};

class BitWriter {
 public:
  void put(std::uint32_t value, int nbits);
  Bitstream finish() &&;

 private:
  Bitstream bs_;
};

class BitReader {
 public:
  explicit BitReader(const Bitstream& bs) : bs_(bs) {}

  /// Throws CorruptionError past the end of the stream.
  std::uint32_t get(int nbits);
  int bit();
  std::uint64_t position() const { return pos_; }

 private:
  const Bitstream& bs_;
  std::uint64_t pos_ = 0;
};

inline constexpr int kMaxFixedWidth = 16;
inline constexpr int kMaxCodeLength = 16;

/// Checks the Bitstream invariants; throws CorruptionError.
void validate(const Bitstream& bs);

Bitstream encode_fixed(std::span<const std::uint32_t> indices, int bit_width);
std::vector<std::uint32_t> decode_fixed(const Bitstream& bs, int bit_width, std::size_t n);

/// Per-symbol code lengths (0 = absent). Codes are assigned canonically in
/// (length, symbol) order, so the lengths alone define the code.
struct HuffmanTable {
  std::vector<std::uint8_t> code_lengths;
  bool length_limited = false;  // lengths were capped at kMaxCodeLength

  bool operator==(const HuffmanTable&) const = default;
};

/// Huffman code lengths for the nonzero bins. Merge ties are broken by node
/// creation order (leaves in symbol order first). A lone symbol gets length
/// 1. When the optimal code exceeds kMaxCodeLength the lengths are recomputed
/// by package-merge and the table is flagged.
HuffmanTable build_huffman(const Histogram& h);

/// Optimal lengths under a maximum code length (package-merge).
std::vector<std::uint8_t> limited_code_lengths(const Histogram& h, int max_length);

/// Throws CorruptionError unless some symbol is present, every length is at
/// most kMaxCodeLength and the Kraft sum is at most one.
void validate(const HuffmanTable& table);

/// Canonical codewords, right-aligned; zero for absent symbols.
std::vector<std::uint32_t> canonical_codes(const HuffmanTable& table);

/// Sum of code lengths over the histogram.
std::uint64_t coded_bits(const HuffmanTable& table, const Histogram& h);

Bitstream encode_huffman(std::span<const std::uint32_t> indices, const HuffmanTable& table);
std::vector<std::uint32_t> decode_huffman(const Bitstream& bs, const HuffmanTable& table, std::size_t n);

}  // namespace nncomp
