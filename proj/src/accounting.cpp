#include "nncomp/accounting.hpp"

namespace nncomp {

ParamAccounting param_accounting(const Network& net) {
  ParamAccounting acc;
  for (const auto& layer : net.layers) {
    if (layer.tensors.empty()) continue;
    LayerParamCount c;
    c.name = layer.name;
    for (const auto& [role, t] : layer.tensors) {
      switch (role) {
        case TensorRole::ConvWeight: c.conv_weights += t.size(); break;
        case TensorRole::ConvBias: c.conv_bias += t.size(); break;
        default: c.batchnorm += t.size(); break;
      }
    }
    acc.conv_total += c.conv_total();
    acc.batchnorm_total += c.batchnorm;
    acc.layers.push_back(std::move(c));
  }
  return acc;
}

}  // namespace nncomp
