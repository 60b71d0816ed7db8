#include "nncomp/pipeline.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"

#include "nncomp/error.hpp"
#include "nncomp/model_io.hpp"
#include "nncomp/quantized_network.hpp"

namespace nncomp {

using nlohmann::json;

std::string_view to_string(Coding c) { return c == Coding::Huffman ? "vlc" : "flc"; }

Coding parse_coding(std::string_view text) {
  if (text == "flc") return Coding::Fixed;
  if (text == "vlc") return Coding::Huffman;
  throw ConfigError("coding must be 'flc' or 'vlc', got '" + std::string(text) + "'");
}

double SizeBreakdown::log10_total() const { return std::log10(static_cast<double>(total)); }

namespace {

TensorRecord quantized_record(const QuantizedTensor& qt, Coding coding) {
  TensorRecord r;
  std::visit(
      [&](const auto& q) {
        if constexpr (std::is_same_v<std::decay_t<decltype(q)>, ScalarQuantizer>) {
          r.encoding = RecordEncoding::Scalar;
          r.d = 1;
          r.codebook.assign(q.centroids().data(), q.centroids().data() + q.centroids().size());
        } else {
          r.encoding = RecordEncoding::Vector;
          r.d = q.dim();
          r.codebook.assign(q.codebook().data(), q.codebook().data() + q.codebook().size());
        }
        r.k = static_cast<std::uint32_t>(q.size());
      },
      qt.quantizer);
  r.coding = coding;
  r.bit_width = qt.index_bits;
  r.pad = qt.indices.pad_count;
  r.symbols = static_cast<std::uint32_t>(qt.indices.indices.size());
  if (coding == Coding::Fixed) {
    r.payload = encode_fixed(qt.indices.indices, r.bit_width);
  } else {
    r.table = build_huffman(Histogram::of<std::uint32_t>(qt.indices.indices, r.k));
    r.payload = encode_huffman(qt.indices.indices, r.table);
  }
  return r;
}

std::vector<float> decode_record(const TensorRecord& r, const Shape& shape) {
  if (static_cast<std::int64_t>(r.count) != numel(shape))
    throw CorruptionError("record holds " + std::to_string(r.count) + " values for shape " + shape_to_string(shape));
  if (r.encoding == RecordEncoding::Raw) {
    if (r.raw.size() != r.count) throw CorruptionError("raw record length mismatch");
    return r.raw;
  }
  if (r.k == 0 || r.d < 1 || r.codebook.size() != static_cast<std::size_t>(r.k) * static_cast<std::size_t>(r.d))
    throw CorruptionError("codebook size does not match k and d");
  std::vector<std::uint32_t> indices;
  if (r.coding == Coding::Fixed) {
    indices = decode_fixed(r.payload, r.bit_width, r.symbols);
  } else {
    if (r.table.code_lengths.size() != r.k) throw CorruptionError("Huffman table size does not match k");
    indices = decode_huffman(r.payload, r.table, r.symbols);
  }
  Tensor t;
  try {
    if (r.encoding == RecordEncoding::Scalar) {
      ScalarQuantizer q(Eigen::Map<const Eigen::VectorXf>(r.codebook.data(), r.k));
      t = sq_decode(q, IndexTensor{shape, std::move(indices), 1, 0});
    } else {
      VectorQuantizer q(Eigen::Map<const RowMatrixXf>(r.codebook.data(), r.k, r.d));
      t = vq_decode(q, IndexTensor{shape, std::move(indices), r.d, r.pad});
    }
  } catch (const ArgumentError& e) {
    throw CorruptionError(std::string("invalid codebook: ") + e.what());
  }
  return std::move(t.data);
}

}  // namespace

CompressedModel compress(const Network& net, const CompressionConfig& cfg) {
  if (!fully_materialized(net)) throw ArgumentError("compress needs a network with every tensor materialized");
  const Network work = cfg.prune_at ? prune_at(net, *cfg.prune_at) : net;
  TiedNetwork tn = cfg.tying ? tie_blocks(work, *cfg.tying) : trivially_tied(work);
  const auto qn = quantize_network(tn.unique_layers, cfg.spec, cfg.seed);

  CompressedModel cm;
  cm.config = cfg;
  for (const auto& layer : qn.base.layers) {
    const auto qit = qn.quantized.find(layer.name);
    for (const auto& [role, t] : layer.tensors) {
      if (t.size() > std::numeric_limits<std::uint32_t>::max())
        throw ArgumentError("layer '" + layer.name + "' tensor too large for a record");
      TensorRecord r;
      const QuantizedTensor* qt = nullptr;
      if (qit != qn.quantized.end())
        if (auto rit = qit->second.find(role); rit != qit->second.end()) qt = &rit->second;
      if (qt) {
        r = quantized_record(*qt, cfg.coding);
      } else {
        r.encoding = RecordEncoding::Raw;
        r.raw = t.data;
      }
      r.layer = layer.name;
      r.role = role;
      r.count = static_cast<std::uint32_t>(t.size());
      cm.records.push_back(std::move(r));
    }
  }
  for (auto& layer : tn.unique_layers.layers)
    for (auto& [role, t] : layer.tensors) t.data.clear();
  cm.structure = std::move(tn);
  return cm;
}

Network decompress(const CompressedModel& cm) {
  TiedNetwork tn = cm.structure;
  std::size_t next = 0;
  for (auto& layer : tn.unique_layers.layers) {
    for (auto& [role, t] : layer.tensors) {
      if (next >= cm.records.size()) throw CorruptionError("container has fewer records than tensors");
      const auto& r = cm.records[next++];
      try {
        t.data = decode_record(r, t.shape);
      } catch (const Error& e) {
        rethrow_with_context(e, "layer '" + layer.name + "' tensor " + std::string(to_string(role)));
      }
    }
  }
  if (next != cm.records.size()) throw CorruptionError("container has more records than tensors");
  Network net = untie(tn);
  validate(net);
  return net;
}

namespace {

json manifest_json(const CompressedModel& cm) {
  json m;
  m["format"] = "NNZ1";
  m["arch"] = cm.structure.unique_layers.arch_tag;
  m["seed"] = cm.config.seed;
  json c;
  c["spec"] = to_text(cm.config.spec);
  c["coding"] = std::string(to_string(cm.config.coding));
  c["prune_at"] = cm.config.prune_at ? json(*cm.config.prune_at) : json(nullptr);
  c["tying"] = cm.config.tying ? json(to_text(*cm.config.tying)) : json(nullptr);
  m["config"] = std::move(c);
  m["layers"] = layers_to_json(cm.structure.unique_layers, false);
  json ex = json::array();
  for (const auto& e : cm.structure.expansion) {
    json j;
    j["name"] = e.name;
    j["template"] = e.template_name;
    j["repeat"] = e.repeat;
    if (!e.input.empty()) j["input"] = e.input;
    if (!e.skip.empty()) j["skip"] = e.skip;
    ex.push_back(std::move(j));
  }
  m["expansion"] = std::move(ex);
  return m;
}

}  // namespace

Bytes serialize(const CompressedModel& cm, SizeBreakdown* sizes) {
  SizeBreakdown s;
  Bytes out;
  ByteWriter w(out);
  w.raw(std::string_view(kContainerMagic, 4));
  w.u8(kContainerVersion);
  const auto text = manifest_json(cm).dump();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  s.manifest += out.size();

  for (const auto& r : cm.records) {
    const auto start = out.size();
    w.u8(static_cast<std::uint8_t>(r.encoding));
    w.u8(static_cast<std::uint8_t>(r.encoding == RecordEncoding::Raw ? Coding::Fixed : r.coding));
    w.u32(r.count);
    s.manifest += 6;
    if (r.encoding == RecordEncoding::Raw) {
      for (float v : r.raw) w.f32(v);
      s.exempt += 4 * r.raw.size();
    } else {
      w.u32(r.k);
      w.u8(static_cast<std::uint8_t>(r.d));
      w.u8(static_cast<std::uint8_t>(r.bit_width));
      w.u8(static_cast<std::uint8_t>(r.pad));
      s.manifest += 7;
      for (float v : r.codebook) w.f32(v);
      s.codebooks += 4 * r.codebook.size();
      if (r.coding == Coding::Huffman) {
        w.raw(r.table.code_lengths);
        w.u8(r.table.length_limited ? 1 : 0);
        s.huffman_tables += r.table.code_lengths.size() + 1;
      }
      w.u32(r.symbols);
      w.u64(r.payload.bit_length);
      s.manifest += 12;
      w.raw(r.payload.bytes);
      s.index_payload += r.payload.bytes.size();
    }
    w.u32(crc32(std::span<const std::uint8_t>(out).subspan(start)));
    s.manifest += 4;
  }
  s.total = out.size();
  if (sizes) *sizes = s;
  return out;
}

namespace {

TensorRecord parse_record(ByteReader& r, std::span<const std::uint8_t> bytes, const Tensor& t) {
  const auto start = r.position();
  TensorRecord rec;
  const auto enc = r.u8();
  const auto coding = r.u8();
  if (enc > 2) throw CorruptionError("unknown record encoding " + std::to_string(enc));
  if (coding > 1 || (enc == 0 && coding != 0)) throw CorruptionError("unknown coding mode " + std::to_string(coding));
  rec.encoding = static_cast<RecordEncoding>(enc);
  rec.coding = static_cast<Coding>(coding);
  rec.count = r.u32();
  if (static_cast<std::int64_t>(rec.count) != t.size())
    throw CorruptionError("record holds " + std::to_string(rec.count) + " values for shape " + shape_to_string(t.shape));
  if (rec.encoding == RecordEncoding::Raw) {
    if (std::uint64_t{rec.count} * 4 > r.remaining()) throw CorruptionError("raw payload truncated");
    rec.raw.resize(rec.count);
    for (auto& v : rec.raw) v = r.f32();
  } else {
    rec.k = r.u32();
    rec.d = r.u8();
    rec.bit_width = r.u8();
    rec.pad = r.u8();
    if (rec.k == 0 || rec.k > (1U << 16)) throw CorruptionError("codeword count " + std::to_string(rec.k) + " out of range");
    if (rec.d == 0) throw CorruptionError("zero block size");
    const std::uint64_t cb = std::uint64_t{rec.k} * static_cast<std::uint64_t>(rec.d);
    if (cb * 4 > r.remaining()) throw CorruptionError("codebook truncated");
    rec.codebook.resize(cb);
    for (auto& v : rec.codebook) v = r.f32();
    if (rec.coding == Coding::Huffman) {
      const auto lens = r.take(rec.k);
      rec.table.code_lengths.assign(lens.begin(), lens.end());
      rec.table.length_limited = r.u8() != 0;
    }
    rec.symbols = r.u32();
    rec.payload.bit_length = r.u64();
    const auto nbytes = (rec.payload.bit_length + 7) / 8;
    if (nbytes > r.remaining()) throw CorruptionError("index payload truncated");
    const auto p = r.take(static_cast<std::size_t>(nbytes));
    rec.payload.bytes.assign(p.begin(), p.end());
  }
  const auto end = r.position();
  const auto stored = r.u32();
  if (crc32(bytes.subspan(start, end - start)) != stored) throw CorruptionError("record checksum mismatch");
  return rec;
}

}  // namespace

CompressedModel parse_container(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "NNZ1 container");
  if (bytes.size() < 4 || !std::equal(kContainerMagic, kContainerMagic + 4, bytes.begin()))
    throw FormatError("not an NNZ1 container (bad magic)");
  r.take(4);
  if (const auto v = r.u8(); v != kContainerVersion)
    throw FormatError("unsupported NNZ1 version " + std::to_string(v));
  const auto len = r.u32();
  const auto text = r.take(len);
  json m = json::parse(text.begin(), text.end(), nullptr, false);
  if (m.is_discarded() || !m.is_object()) throw ManifestError("NNZ1 manifest is not valid JSON");

  CompressedModel cm;
  try {
    if (m.at("format") != "NNZ1") throw ManifestError("manifest format is not NNZ1");
    cm.config.seed = m.at("seed").get<std::uint64_t>();
    const auto& c = m.at("config");
    cm.config.spec = parse_quantization_spec(c.at("spec").get<std::string>());
    cm.config.coding = parse_coding(c.at("coding").get<std::string>());
    if (!c.at("prune_at").is_null()) cm.config.prune_at = c["prune_at"].get<std::string>();
    if (!c.at("tying").is_null()) cm.config.tying = parse_tying_plan(c["tying"].get<std::string>());
    cm.structure.unique_layers = layers_from_json(m.at("layers"), nullptr);
    cm.structure.unique_layers.arch_tag = m.at("arch").get<std::string>();
    for (const auto& j : m.at("expansion")) {
      ExpansionEntry e;
      e.name = j.at("name").get<std::string>();
      e.template_name = j.at("template").get<std::string>();
      e.repeat = j.at("repeat").get<int>();
      e.input = j.value("input", std::string());
      e.skip = j.value("skip", std::string());
      cm.structure.expansion.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ManifestError(std::string("malformed NNZ1 manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw ManifestError(std::string("malformed config echo: ") + e.what());
  }

  std::size_t index = 0;
  for (const auto& layer : cm.structure.unique_layers.layers) {
    for (const auto& [role, t] : layer.tensors) {
      try {
        auto rec = parse_record(r, bytes, t);
        rec.layer = layer.name;
        rec.role = role;
        cm.records.push_back(std::move(rec));
      } catch (const Error& e) {
        rethrow_with_context(e, "record " + std::to_string(index) + " (layer '" + layer.name + "' tensor " +
                                    std::string(to_string(role)) + ")");
      }
      ++index;
    }
  }
  if (!r.at_end()) throw CorruptionError("NNZ1 container: trailing bytes after last record");
  return cm;
}

SizeBreakdown size_report(const CompressedModel& cm) {
  SizeBreakdown s;
  serialize(cm, &s);
  return s;
}

CompressedModel load_compressed(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_container(bytes);
  } catch (const Error& e) {
    rethrow_with_context(e, path.string());
  }
}

void save_compressed(const CompressedModel& cm, const std::filesystem::path& path) {
  write_file(path, serialize(cm));
}

}  // namespace nncomp
