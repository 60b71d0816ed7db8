#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nncomp/transform.hpp"

namespace nncomp {

/// Line-oriented text config shared by quantization specs and tying plans:
///
///   # comment
///   key = value
///
/// Keys and values are trimmed; blank lines and comments are ignored.
struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

std::vector<ConfigEntry> parse_config(std::string_view text);
std::string read_text(const std::filesystem::path& path);

enum class QuantKind : std::uint8_t { Exempt, Scalar, Vector };

/// Per-layer quantization mode: `exempt`, `scalar:<bits>` or
/// `vector:<k>x<d>`.
struct QuantMode {
  QuantKind kind = QuantKind::Exempt;
  int bits = 0;  // scalar
  int k = 0;     // vector codewords
  int d = 1;     // vector block size

  static QuantMode exempt() { return {}; }
  static QuantMode scalar(int bits) { return {QuantKind::Scalar, bits, 0, 1}; }
  static QuantMode vector(int k, int d) { return {QuantKind::Vector, 0, k, d}; }

  /// Number of codewords the mode allows.
  std::uint32_t codewords() const;
  /// Fixed-length code width for this mode's indices.
  int index_bits() const;

  bool operator==(const QuantMode&) const = default;
};

QuantMode parse_quant_mode(std::string_view text);
std::string to_string(const QuantMode& mode);
void validate(const QuantMode& mode);

/// Keys: `default = <mode>`, `bn_exempt = true|false`,
/// `bias_exempt = true|false`, `layer.<name> = <mode>`.
struct QuantizationSpec {
  std::map<std::string, QuantMode> layers;
  QuantMode default_mode = QuantMode::exempt();
  bool bn_exempt = true;
  bool bias_exempt = false;

  const QuantMode& mode_for(const std::string& layer) const;

  static QuantizationSpec uniform_scalar(int bits, bool bn_exempt = true);

  bool operator==(const QuantizationSpec&) const = default;
};

QuantizationSpec parse_quantization_spec(std::string_view text);
std::string to_text(const QuantizationSpec& spec);

/// One `group = <repeat> : <layer> <layer> ...` line per tying group.
TyingPlan parse_tying_plan(std::string_view text);
std::string to_text(const TyingPlan& plan);

}  // namespace nncomp
