#include "nncomp/quantized_network.hpp"

#include <numeric>

#include "nncomp/error.hpp"
#include "nncomp/random.hpp"

namespace nncomp {

QuantMode tensor_mode(const QuantizationSpec& spec, const Layer& layer, TensorRole role) {
  if (is_batchnorm_role(role) && spec.bn_exempt) return QuantMode::exempt();
  if (role == TensorRole::ConvBias && spec.bias_exempt) return QuantMode::exempt();
  return spec.mode_for(layer.name);
}

namespace {

// Seeded draw of `cap` rows without replacement, kept in original order.
RowMatrixXf subsample_rows(const RowMatrixXf& rows, std::size_t cap, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(rows.rows());
  if (n <= cap) return rows;
  Rng rng(seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 0; i < cap; ++i) std::swap(perm[i], perm[i + rng.below(n - i)]);
  perm.resize(cap);
  std::sort(perm.begin(), perm.end());
  RowMatrixXf out(static_cast<Eigen::Index>(cap), rows.cols());
  for (std::size_t i = 0; i < cap; ++i)
    out.row(static_cast<Eigen::Index>(i)) = rows.row(static_cast<Eigen::Index>(perm[i]));
  return out;
}

}  // namespace

QuantizedTensor quantize_tensor(const Tensor& t, const QuantMode& mode, std::uint64_t seed,
                                const TrainOptions& opts) {
  validate(mode);
  if (mode.kind == QuantKind::Exempt) throw ArgumentError("exempt tensors are not quantized");
  if (!t.materialized()) throw ArgumentError("cannot quantize a shape-only tensor");
  TrainOptions o = opts;
  o.seed = seed;
  QuantizedTensor qt{ScalarQuantizer(Eigen::VectorXf::Zero(1)), {}, mode.index_bits(), {}};
  const int k = static_cast<int>(mode.codewords());
  if (mode.kind == QuantKind::Scalar) {
    RowMatrixXf samples = to_blocks(t.data, 1);
    samples = subsample_rows(samples, kMaxTrainingSamples, derive_seed(seed, "subsample"));
    auto q = train_lloyd_max(std::span<const float>(samples.data(), static_cast<std::size_t>(samples.size())),
                             k, o, &qt.report);
    qt.indices = sq_encode(q, t);
    qt.quantizer = std::move(q);
  } else {
    auto blocks = subsample_rows(to_blocks(t.data, mode.d), kMaxTrainingSamples,
                                 derive_seed(seed, "subsample"));
    auto q = train_lbg(blocks, k, o, &qt.report);
    qt.indices = vq_encode(q, t);
    qt.quantizer = std::move(q);
  }
  return qt;
}

Tensor decode_tensor(const QuantizedTensor& qt) {
  return std::visit(
      [&](const auto& q) -> Tensor {
        if constexpr (std::is_same_v<std::decay_t<decltype(q)>, ScalarQuantizer>)
          return sq_decode(q, qt.indices);
        else
          return vq_decode(q, qt.indices);
      },
      qt.quantizer);
}

QuantizedNetwork quantize_network(const Network& net, const QuantizationSpec& spec,
                                  std::uint64_t seed, const TrainOptions& opts) {
  for (const auto& [name, mode] : spec.layers) {
    if (!net.find(name)) throw ConfigError("quantization spec names unknown layer '" + name + "'");
    validate(mode);
  }
  validate(spec.default_mode);

  QuantizedNetwork qn;
  qn.base = net;
  for (auto& layer : qn.base.layers) {
    for (auto& [role, t] : layer.tensors) {
      const auto mode = tensor_mode(spec, layer, role);
      if (mode.kind == QuantKind::Exempt) continue;
      const std::string label = layer.name + "/" + std::string(to_string(role));
      try {
        qn.quantized[layer.name].insert_or_assign(role, quantize_tensor(t, mode, derive_seed(seed, label), opts));
      } catch (const Error& e) {
        rethrow_with_context(e, "layer '" + layer.name + "' tensor " + std::string(to_string(role)));
      }
      t.data.clear();
      t.data.shrink_to_fit();
    }
  }
  return qn;
}

Network dequantize(const QuantizedNetwork& qn) {
  Network net = qn.base;
  for (const auto& [name, roles] : qn.quantized) {
    Layer* layer = net.find(name);
    if (!layer) throw CorruptionError("quantized record for unknown layer '" + name + "'");
    for (const auto& [role, qt] : roles) {
      Tensor* t = layer->find(role);
      if (!t) throw CorruptionError("quantized record for missing tensor in layer '" + name + "'");
      try {
        auto decoded = decode_tensor(qt);
        if (decoded.shape != t->shape) throw CorruptionError("decoded shape mismatch");
        *t = std::move(decoded);
      } catch (const Error& e) {
        rethrow_with_context(e, "layer '" + name + "' tensor " + std::string(to_string(role)));
      }
    }
  }
  return net;
}

}  // namespace nncomp
