#include "nncomp/model_io.hpp"

#include <bit>
#include <cstring>

namespace nncomp {

static_assert(std::endian::native == std::endian::little, "payload copy assumes a little-endian host");

using nlohmann::json;

json layers_to_json(const Network& net, bool with_payload_flags) {
  json layers = json::array();
  for (const auto& l : net.layers) {
    json j;
    j["name"] = l.name;
    j["kind"] = std::string(to_string(l.kind));
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::MaxPool || l.kind == LayerKind::AvgPool) {
      j["kernel"] = {l.window.kernel_h, l.window.kernel_w};
      j["stride"] = l.window.stride;
      j["padding"] = l.window.padding;
    }
    if (l.kind == LayerKind::Conv) j["groups"] = l.groups;
    if (l.kind == LayerKind::BatchNorm) j["eps"] = l.bn_eps;
    if (!l.input.empty()) j["input"] = l.input;
    if (!l.skip.empty()) j["skip"] = l.skip;
    json tensors = json::array();
    for (const auto& [role, t] : l.tensors) {
      json tj;
      tj["role"] = std::string(to_string(role));
      tj["shape"] = t.shape;
      if (with_payload_flags) tj["payload"] = t.materialized();
      tensors.push_back(std::move(tj));
    }
    j["tensors"] = std::move(tensors);
    layers.push_back(std::move(j));
  }
  return layers;
}

Network layers_from_json(const json& layers, std::vector<bool>* payload_flags) {
  Network net;
  try {
    for (const auto& j : layers) {
      Layer l;
      l.name = j.at("name").get<std::string>();
      l.kind = parse_layer_kind(j.at("kind").get<std::string>());
      if (j.contains("kernel")) {
        l.window.kernel_h = j["kernel"].at(0).get<int>();
        l.window.kernel_w = j["kernel"].at(1).get<int>();
        l.window.stride = j.at("stride").get<int>();
        l.window.padding = j.at("padding").get<int>();
      }
      if (j.contains("groups")) l.groups = j["groups"].get<int>();
      if (j.contains("eps")) l.bn_eps = j["eps"].get<float>();
      if (j.contains("input")) l.input = j["input"].get<std::string>();
      if (j.contains("skip")) l.skip = j["skip"].get<std::string>();
      for (const auto& tj : j.at("tensors")) {
        const auto role = parse_role(tj.at("role").get<std::string>());
        if (l.tensors.count(role))
          throw ManifestError("layer '" + l.name + "' lists tensor role twice");
        l.tensors[role] = Tensor::shape_only(tj.at("shape").get<Shape>());
        if (payload_flags) payload_flags->push_back(tj.value("payload", false));
      }
      net.layers.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  }
  return net;
}

Bytes encode_model(const Network& net) {
  validate(net);
  json manifest;
  manifest["format"] = "NNW1";
  manifest["arch"] = net.arch_tag;
  manifest["layers"] = layers_to_json(net, true);
  const std::string text = manifest.dump();

  Bytes out;
  ByteWriter w(out);
  w.raw(std::string_view(kModelMagic, 4));
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  for (const auto& l : net.layers) {
    for (const auto& [role, t] : l.tensors) {
      if (!t.materialized()) continue;
      const std::size_t start = out.size();
      for (float v : t.data) w.f32(v);
      const auto crc = crc32(std::span(out).subspan(start));
      w.u32(crc);
    }
  }
  return out;
}

Network decode_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "NNW1 container");
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0)
    throw FormatError("not an NNW1 file (bad magic)");
  r.take(4);
  const auto len = r.u32();
  const auto text = r.take(len);
  json manifest = json::parse(text.begin(), text.end(), nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object())
    throw ManifestError("NNW1 manifest is not valid JSON");
  std::vector<bool> flags;
  Network net;
  try {
    net = layers_from_json(manifest.at("layers"), &flags);
    net.arch_tag = manifest.value("arch", std::string());
  } catch (const json::exception& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  }

  std::size_t flag = 0;
  for (auto& l : net.layers) {
    for (auto& [role, t] : l.tensors) {
      if (!flags[flag++]) continue;
      const std::string where = "layer '" + l.name + "' tensor " + std::string(to_string(role));
      const auto n = t.size();
      if (n <= 0) throw ManifestError(where + ": invalid shape");
      if (static_cast<std::uint64_t>(n) * 4 + 4 > r.remaining())
        throw CorruptionError(where + ": payload truncated");
      const auto payload = r.take(static_cast<std::size_t>(n) * 4);
      const auto stored = r.u32();
      if (crc32(payload) != stored) throw CorruptionError(where + ": checksum mismatch");
      t.data.resize(static_cast<std::size_t>(n));
      std::memcpy(t.data.data(), payload.data(), payload.size());
    }
  }
  if (!r.at_end()) throw CorruptionError("NNW1 container: trailing bytes after last payload");
  validate(net);
  return net;
}

Network load_model(const std::filesystem::path& path) {
  try {
    return decode_model(read_file(path));
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    rethrow_with_context(e, path.string());
  }
}

void save_model(const Network& net, const std::filesystem::path& path) {
  write_file(path, encode_model(net));
}

}  // namespace nncomp
