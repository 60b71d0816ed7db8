#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nncomp/byte_io.hpp"
#include "nncomp/config.hpp"
#include "nncomp/entropy_code.hpp"
#include "nncomp/network.hpp"
#include "nncomp/transform.hpp"

namespace nncomp {

enum class Coding : std::uint8_t { Fixed = 0, Huffman = 1 };

std::string_view to_string(Coding c);  // "flc" / "vlc"
Coding parse_coding(std::string_view text);

struct CompressionConfig {
  QuantizationSpec spec;
  Coding coding = Coding::Fixed;
  std::optional<std::string> prune_at;
  std::optional<TyingPlan> tying;
  std::uint64_t seed = 0;

  bool operator==(const CompressionConfig&) const = default;
};

enum class RecordEncoding : std::uint8_t { Raw = 0, Scalar = 1, Vector = 2 };

/// One stored tensor of the unique (post-tying) layers. Raw records keep the
/// float values; quantized records keep the codebook and the coded index
/// stream.
struct TensorRecord {
  std::string layer;  // not serialized; follows from manifest order
  TensorRole role = TensorRole::ConvWeight;
  RecordEncoding encoding = RecordEncoding::Raw;
  std::uint32_t count = 0;  // tensor elements

  std::vector<float> raw;

  Coding coding = Coding::Fixed;
  std::uint32_t k = 0;
  int d = 1;
  int bit_width = 0;
  int pad = 0;
  std::vector<float> codebook;  // k x d row-major
  HuffmanTable table;           // Huffman coding only
  std::uint32_t symbols = 0;
  Bitstream payload;

  bool operator==(const TensorRecord&) const = default;
};

struct CompressedModel {
  CompressionConfig config;
  TiedNetwork structure;  // unique layers are shape-only
  std::vector<TensorRecord> records;

  bool operator==(const CompressedModel&) const = default;
};

inline constexpr char kContainerMagic[4] = {'N', 'N', 'Z', '1'};
inline constexpr std::uint8_t kContainerVersion = 1;

/// Byte totals per category of a serialized container. `manifest` covers
/// the header, the JSON manifest, record headers and checksums.
struct SizeBreakdown {
  std::uint64_t index_payload = 0;
  std::uint64_t codebooks = 0;
  std::uint64_t huffman_tables = 0;
  std::uint64_t exempt = 0;
  std::uint64_t manifest = 0;
  std::uint64_t total = 0;

  double log10_total() const;
};

/// prune -> tie -> quantize unique layers -> entropy-code. Requires a fully
/// materialized network.
CompressedModel compress(const Network& net, const CompressionConfig& cfg);

/// Decodes every record and unties. Quantized tensors come back as their
/// centroid reconstructions; raw tensors are bit-exact.
Network decompress(const CompressedModel& cm);

/// NNZ1 container:
///   "NNZ1" | u8 version | u32 manifest length | manifest (UTF-8 JSON) |
///   one record per tensor of the unique layers, in manifest order.
/// Record: u8 encoding | u8 coding | u32 n | body | u32 CRC32 of the record
/// bytes before it. Raw body: n x f32. Quantized body: u32 k | u8 d |
/// u8 bit width | u8 pad | k*d x f32 codebook | [Huffman: k x u8 code
/// lengths | u8 length-limited flag] | u32 symbols | u64 bit length | bytes.
Bytes serialize(const CompressedModel& cm, SizeBreakdown* sizes = nullptr);
CompressedModel parse_container(std::span<const std::uint8_t> bytes);

SizeBreakdown size_report(const CompressedModel& cm);

CompressedModel load_compressed(const std::filesystem::path& path);
void save_compressed(const CompressedModel& cm, const std::filesystem::path& path);

}  // namespace nncomp
