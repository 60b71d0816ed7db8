#include "nncomp/entropy_code.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <string>

#include "nncomp/error.hpp"

namespace nncomp {

void BitWriter::put(std::uint32_t value, int nbits) {
  for (int i = nbits - 1; i >= 0; --i) {
    if (bs_.bit_length % 8 == 0) bs_.bytes.push_back(0);
    if ((value >> i) & 1U) bs_.bytes.back() |= static_cast<std::uint8_t>(0x80U >> (bs_.bit_length % 8));
    ++bs_.bit_length;
  }
}

Bitstream BitWriter::finish() && { return std::move(bs_); }

int BitReader::bit() {
  if (pos_ >= bs_.bit_length) throw CorruptionError("bitstream: read past end");
  const int b = (bs_.bytes[pos_ / 8] >> (7 - pos_ % 8)) & 1;
  ++pos_;
  return b;
}

std::uint32_t BitReader::get(int nbits) {
  if (pos_ + static_cast<std::uint64_t>(nbits) > bs_.bit_length)
    throw CorruptionError("bitstream: read past end");
  std::uint32_t v = 0;
  for (int i = 0; i < nbits; ++i) v = (v << 1) | static_cast<std::uint32_t>(bit());
  return v;
}

void validate(const Bitstream& bs) {
  const std::uint64_t nbytes = bs.bytes.size();
  if (bs.bit_length > 8 * nbytes || 8 * nbytes >= bs.bit_length + 8)
    throw CorruptionError("bitstream: bit length " + std::to_string(bs.bit_length) +
                          " inconsistent with " + std::to_string(nbytes) + " bytes");
  if (const auto used = bs.bit_length % 8; used != 0) {
    const auto mask = static_cast<std::uint8_t>(0xFFU >> used);
    if (bs.bytes.back() & mask) throw CorruptionError("bitstream: nonzero padding bits");
  }
}

namespace {

void check_width(int bit_width) {
  if (bit_width < 1 || bit_width > kMaxFixedWidth)
    throw ArgumentError("fixed-length width must lie in [1,16], got " + std::to_string(bit_width));
}

}  // namespace

Bitstream encode_fixed(std::span<const std::uint32_t> indices, int bit_width) {
  check_width(bit_width);
  const std::uint32_t limit = 1U << bit_width;
  BitWriter w;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= limit)
      throw ArgumentError("index " + std::to_string(indices[i]) + " at position " + std::to_string(i) +
                          " does not fit in " + std::to_string(bit_width) + " bits");
    w.put(indices[i], bit_width);
  }
  return std::move(w).finish();
}

std::vector<std::uint32_t> decode_fixed(const Bitstream& bs, int bit_width, std::size_t n) {
  check_width(bit_width);
  validate(bs);
  if (bs.bit_length < static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(bit_width))
    throw CorruptionError("fixed-length stream too short: " + std::to_string(bs.bit_length) + " bits for " +
                          std::to_string(n) + " symbols of " + std::to_string(bit_width) + " bits");
  BitReader r(bs);
  std::vector<std::uint32_t> out(n);
  for (auto& v : out) v = r.get(bit_width);
  return out;
}

namespace {

struct Node {
  std::uint64_t weight;
  int leaf;  // symbol, or -1 for a merged node
  int left;
  int right;
};

// Depth of each leaf below the subtree roots in `roots`, counting one per
// occurrence.
void count_leaves(const std::vector<Node>& nodes, const std::vector<int>& roots, std::vector<std::uint8_t>& len) {
  std::vector<int> stack(roots.begin(), roots.end());
  while (!stack.empty()) {
    const Node& n = nodes[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (n.leaf >= 0) {
      ++len[static_cast<std::size_t>(n.leaf)];
    } else {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
}

std::vector<int> present_symbols(const Histogram& h) {
  std::vector<int> s;
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    if (h.counts[i] > 0) s.push_back(static_cast<int>(i));
  if (s.empty()) throw ArgumentError("Huffman code needs at least one nonzero bin");
  return s;
}

}  // namespace

std::vector<std::uint8_t> limited_code_lengths(const Histogram& h, int max_length) {
  auto symbols = present_symbols(h);
  std::vector<std::uint8_t> len(h.counts.size(), 0);
  const std::size_t n = symbols.size();
  if (n == 1) {
    len[static_cast<std::size_t>(symbols[0])] = 1;
    return len;
  }
  if (max_length < 1 || max_length >= 32 || (std::uint64_t{1} << max_length) < n)
    throw ArgumentError("cannot code " + std::to_string(n) + " symbols within " + std::to_string(max_length) +
                        " bits");
  std::stable_sort(symbols.begin(), symbols.end(),
                   [&](int a, int b) { return h.counts[static_cast<std::size_t>(a)] < h.counts[static_cast<std::size_t>(b)]; });

  std::vector<Node> nodes;
  std::vector<int> leaves;
  for (int s : symbols) {
    leaves.push_back(static_cast<int>(nodes.size()));
    nodes.push_back({h.counts[static_cast<std::size_t>(s)], s, -1, -1});
  }
  std::vector<int> list = leaves;
  for (int level = 1; level < max_length; ++level) {
    std::vector<int> packages;
    for (std::size_t i = 0; i + 1 < list.size(); i += 2) {
      const auto a = list[i];
      const auto b = list[i + 1];
      packages.push_back(static_cast<int>(nodes.size()));
      nodes.push_back({nodes[static_cast<std::size_t>(a)].weight + nodes[static_cast<std::size_t>(b)].weight, -1, a, b});
    }
    std::vector<int> merged;
    merged.reserve(leaves.size() + packages.size());
    std::merge(leaves.begin(), leaves.end(), packages.begin(), packages.end(), std::back_inserter(merged),
               [&](int a, int b) { return nodes[static_cast<std::size_t>(a)].weight < nodes[static_cast<std::size_t>(b)].weight; });
    list = std::move(merged);
  }
  list.resize(2 * n - 2);
  count_leaves(nodes, list, len);
  return len;
}

HuffmanTable build_huffman(const Histogram& h) {
  const auto symbols = present_symbols(h);
  HuffmanTable table;
  table.code_lengths.assign(h.counts.size(), 0);
  if (symbols.size() == 1) {
    table.code_lengths[static_cast<std::size_t>(symbols[0])] = 1;
    return table;
  }

  // (weight, creation order) min-heap.
  using Entry = std::pair<std::uint64_t, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::vector<Node> nodes;
  for (int s : symbols) {
    heap.emplace(h.counts[static_cast<std::size_t>(s)], static_cast<int>(nodes.size()));
    nodes.push_back({h.counts[static_cast<std::size_t>(s)], s, -1, -1});
  }
  while (heap.size() > 1) {
    const auto [wa, a] = heap.top();
    heap.pop();
    const auto [wb, b] = heap.top();
    heap.pop();
    heap.emplace(wa + wb, static_cast<int>(nodes.size()));
    nodes.push_back({wa + wb, -1, a, b});
  }

  std::vector<int> depth(nodes.size(), 0);
  int max_depth = 0;
  for (auto i = static_cast<int>(nodes.size()) - 1; i >= 0; --i) {
    const Node& n = nodes[static_cast<std::size_t>(i)];
    if (n.leaf >= 0) {
      max_depth = std::max(max_depth, depth[static_cast<std::size_t>(i)]);
    } else {
      depth[static_cast<std::size_t>(n.left)] = depth[static_cast<std::size_t>(i)] + 1;
      depth[static_cast<std::size_t>(n.right)] = depth[static_cast<std::size_t>(i)] + 1;
    }
  }
  if (max_depth > kMaxCodeLength) {
    table.code_lengths = limited_code_lengths(h, kMaxCodeLength);
    table.length_limited = true;
    return table;
  }
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].leaf >= 0)
      table.code_lengths[static_cast<std::size_t>(nodes[i].leaf)] = static_cast<std::uint8_t>(depth[i]);
  return table;
}

void validate(const HuffmanTable& table) {
  // Kraft sum scaled by 2^kMaxCodeLength.
  std::uint64_t kraft = 0;
  bool any = false;
  for (std::size_t s = 0; s < table.code_lengths.size(); ++s) {
    const int len = table.code_lengths[s];
    if (len == 0) continue;
    if (len > kMaxCodeLength)
      throw CorruptionError("Huffman table: symbol " + std::to_string(s) + " has length " + std::to_string(len));
    kraft += std::uint64_t{1} << (kMaxCodeLength - len);
    any = true;
  }
  if (!any) throw CorruptionError("Huffman table: no symbols present");
  if (kraft > (std::uint64_t{1} << kMaxCodeLength)) throw CorruptionError("Huffman table: Kraft sum exceeds one");
}

namespace {

// Present symbols in canonical (length, symbol) order.
std::vector<std::uint32_t> canonical_order(const HuffmanTable& table) {
  std::vector<std::uint32_t> order;
  for (std::size_t s = 0; s < table.code_lengths.size(); ++s)
    if (table.code_lengths[s] > 0) order.push_back(static_cast<std::uint32_t>(s));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return table.code_lengths[a] < table.code_lengths[b]; });
  return order;
}

}  // namespace

std::vector<std::uint32_t> canonical_codes(const HuffmanTable& table) {
  validate(table);
  std::vector<std::uint32_t> codes(table.code_lengths.size(), 0);
  std::uint32_t code = 0;
  int prev = 0;
  for (auto s : canonical_order(table)) {
    const int len = table.code_lengths[s];
    code <<= (len - prev);
    codes[s] = code++;
    prev = len;
  }
  return codes;
}

std::uint64_t coded_bits(const HuffmanTable& table, const Histogram& h) {
  std::uint64_t bits = 0;
  for (std::size_t s = 0; s < h.counts.size() && s < table.code_lengths.size(); ++s)
    bits += h.counts[s] * table.code_lengths[s];
  return bits;
}

Bitstream encode_huffman(std::span<const std::uint32_t> indices, const HuffmanTable& table) {
  const auto codes = canonical_codes(table);
  BitWriter w;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto s = indices[i];
    if (s >= table.code_lengths.size() || table.code_lengths[s] == 0)
      throw ArgumentError("symbol " + std::to_string(s) + " at position " + std::to_string(i) +
                          " has no Huffman code");
    w.put(codes[s], table.code_lengths[s]);
  }
  return std::move(w).finish();
}

std::vector<std::uint32_t> decode_huffman(const Bitstream& bs, const HuffmanTable& table, std::size_t n) {
  validate(bs);
  const auto order = canonical_order(table);
  const auto codes = canonical_codes(table);

  // first code and offset into `order` per length
  std::vector<std::uint32_t> count(kMaxCodeLength + 1, 0);
  for (auto s : order) ++count[table.code_lengths[s]];
  std::vector<std::uint32_t> first(kMaxCodeLength + 1, 0);
  std::vector<std::uint32_t> offset(kMaxCodeLength + 1, 0);
  std::uint32_t idx = 0;
  for (int len = 1; len <= kMaxCodeLength; ++len) {
    offset[len] = idx;
    if (count[len] > 0) first[len] = codes[order[idx]];
    idx += count[len];
  }

  BitReader r(bs);
  std::vector<std::uint32_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t code = 0;
    int len = 0;
    for (;;) {
      if (r.position() >= bs.bit_length)
        throw CorruptionError("Huffman stream ends inside symbol " + std::to_string(i));
      code = (code << 1) | static_cast<std::uint32_t>(r.bit());
      ++len;
      if (len > kMaxCodeLength) throw CorruptionError("Huffman stream: invalid code at symbol " + std::to_string(i));
      if (count[len] > 0 && code >= first[len] && code - first[len] < count[len]) {
        out.push_back(order[offset[len] + code - first[len]]);
        break;
      }
    }
  }
  return out;
}

}  // namespace nncomp
