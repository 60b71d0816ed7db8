#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nncomp/network.hpp"

namespace nncomp {

struct LayerParamCount {
  std::string name;
  std::int64_t conv_weights = 0;
  std::int64_t conv_bias = 0;
  std::int64_t batchnorm = 0;

  std::int64_t conv_total() const { return conv_weights + conv_bias; }
};

/// Parameter counts per parameterized layer (Conv and BatchNorm), in network
/// order. `conv_total` covers ConvWeight + ConvBias only; BN parameters are
/// reported separately. Works on shape-only manifests.
struct ParamAccounting {
  std::vector<LayerParamCount> layers;
  std::int64_t conv_total = 0;
  std::int64_t batchnorm_total = 0;
};

ParamAccounting param_accounting(const Network& net);

}  // namespace nncomp
