#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "nncomp/config.hpp"
#include "nncomp/network.hpp"
#include "nncomp/quantize.hpp"

namespace nncomp {

struct QuantizedTensor {
  AnyQuantizer quantizer;
  IndexTensor indices;
  int index_bits = 1;  // fixed-length code width
  TrainReport report;
};

/// `base` keeps exempt tensors with their payload; quantized tensors are
/// shape-only there and live in `quantized[layer][role]`.
struct QuantizedNetwork {
  Network base;
  std::map<std::string, std::map<TensorRole, QuantizedTensor>> quantized;
};

/// Training sample cap per tensor; larger tensors are subsampled with a
/// seeded draw.
inline constexpr std::size_t kMaxTrainingSamples = 1'000'000;

/// Resolves the mode applied to one tensor: BN tensors follow the layer mode
/// only when `bn_exempt` is false; conv biases are exempt under
/// `bias_exempt`.
QuantMode tensor_mode(const QuantizationSpec& spec, const Layer& layer, TensorRole role);

/// Trains one quantizer per non-exempt tensor (seeded per layer and role)
/// and encodes it. Throws ConfigError when the spec names an unknown layer.
QuantizedNetwork quantize_network(const Network& net, const QuantizationSpec& spec,
                                  std::uint64_t seed = 0, const TrainOptions& opts = {});

QuantizedTensor quantize_tensor(const Tensor& t, const QuantMode& mode, std::uint64_t seed,
                                const TrainOptions& opts = {});

Tensor decode_tensor(const QuantizedTensor& qt);

Network dequantize(const QuantizedNetwork& qn);

}  // namespace nncomp
