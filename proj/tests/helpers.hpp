#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nncomp/architectures.hpp"
#include "nncomp/error.hpp"
#include "nncomp/netforward.hpp"
#include "nncomp/network.hpp"
#include "nncomp/random.hpp"
#include "nncomp/synth.hpp"

namespace testutil {

using namespace nncomp;

inline std::vector<float> laplace_values(std::uint64_t seed, std::size_t n, double b, double mu = 0.0) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.laplace(mu, b));
  return v;
}

inline Tensor laplace_tensor(std::uint64_t seed, Shape shape, double b) {
  const auto n = static_cast<std::size_t>(numel(shape));
  return Tensor(std::move(shape), laplace_values(seed, n, b));
}

/// conv(in -> out, k x k) [+ BN] + ReLU units with materialized weights.
inline Network toy_chain(std::uint64_t seed, int depth, int in_channels, int channels, bool bn, int kernel = 3) {
  Network net;
  net.arch_tag = "toy";
  int c = in_channels;
  for (int i = 1; i <= depth; ++i) {
    const auto n = "c" + std::to_string(i);
    net.layers.push_back(make_conv(n, c, channels, kernel, 1, kernel / 2, !bn));
    if (bn) net.layers.push_back(make_batchnorm(n + "_bn", channels));
    net.layers.push_back(make_relu(n + "_relu"));
    c = channels;
  }
  SynthOptions o;
  o.seed = seed;
  o.calibration_images = 2;
  o.calibration_size = 8;
  return synthesize_weights(net, o);
}

/// Random small network mixing every layer kind: convs with random kernels,
/// strides, padding, groups and bias, BN, ReLU, pooling and residual adds.
inline Network random_toy(std::uint64_t seed, int in_channels = 3) {
  Rng rng(seed);
  Network net;
  net.arch_tag = "random-toy";
  int c = in_channels;
  const int units = 2 + static_cast<int>(rng.below(3));
  for (int u = 0; u < units; ++u) {
    const auto p = "u" + std::to_string(u);
    const int groups = (c % 2 == 0 && rng.below(3) == 0) ? 2 : 1;
    const int out = groups * (2 + static_cast<int>(rng.below(3)));
    const int k = 1 + 2 * static_cast<int>(rng.below(2));
    const int stride = rng.below(4) == 0 ? 2 : 1;
    const bool bias = rng.below(2) == 0;
    net.layers.push_back(make_conv(p + "_conv", c, out, k, stride, k / 2, bias, groups));
    if (rng.below(2) == 0) net.layers.push_back(make_batchnorm(p + "_bn", out));
    net.layers.push_back(make_relu(p + "_relu"));
    if (rng.below(3) == 0) {
      net.layers.push_back(make_conv(p + "_res", out, out, 3, 1, 1, false));
      net.layers.push_back(make_add(p + "_add", p + "_relu"));
    }
    if (rng.below(4) == 0)
      net.layers.push_back(make_pool(p + "_pool", rng.below(2) ? LayerKind::MaxPool : LayerKind::AvgPool, 2, 1));
    c = out;
  }
  SynthOptions o;
  o.seed = seed;
  o.calibration_images = 2;
  o.calibration_size = 10;
  return synthesize_weights(net, o);
}

inline FeatureMaps<double> random_maps(std::uint64_t seed, int c, int h, int w) {
  Rng rng(seed);
  FeatureMaps<double> f(c, h, w);
  for (Eigen::Index i = 0; i < f.maps.size(); ++i) f.maps.data()[i] = rng.uniform(0.0, 1.0);
  return f;
}

}  // namespace testutil
