#pragma once

#include <filesystem>

#include "json.hpp"

#include "nncomp/byte_io.hpp"
#include "nncomp/network.hpp"

namespace nncomp {

inline constexpr char kModelMagic[4] = {'N', 'N', 'W', '1'};

/// NNW1 container:
///   "NNW1" | u32 manifest length | manifest (UTF-8 JSON) |
///   for every materialized tensor, in manifest order: n x f32 | u32 CRC32
/// All integers and floats little-endian.
Bytes encode_model(const Network& net);
Network decode_model(std::span<const std::uint8_t> bytes);

Network load_model(const std::filesystem::path& path);
void save_model(const Network& net, const std::filesystem::path& path);

/// Manifest JSON for a network. `with_payload_flags` marks which tensors are
/// materialized; the NNZ1 container reuses the same layer schema.
nlohmann::json layers_to_json(const Network& net, bool with_payload_flags);
/// Rebuilds the layer skeleton (shape-only tensors). Returns the payload flag
/// per tensor in manifest order when present.
Network layers_from_json(const nlohmann::json& layers, std::vector<bool>* payload_flags);

}  // namespace nncomp
