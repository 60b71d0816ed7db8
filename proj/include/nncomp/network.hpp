#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nncomp {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense float32 tensor, row-major. A tensor with an empty `data` vector is
/// shape-only: it describes a parameter block without materializing it.
struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {}

  static Tensor shape_only(Shape s) { return Tensor(std::move(s), {}); }

  std::int64_t size() const { return numel(shape); }
  bool materialized() const { return !data.empty(); }

  bool operator==(const Tensor&) const = default;
};

enum class TensorRole : std::uint8_t { ConvWeight, ConvBias, BnScale, BnBias, BnMean, BnVar };

enum class LayerKind : std::uint8_t { Conv, BatchNorm, ReLU, MaxPool, AvgPool, Add };

std::string_view to_string(TensorRole role);
std::string_view to_string(LayerKind kind);
TensorRole parse_role(std::string_view text);
LayerKind parse_layer_kind(std::string_view text);

bool is_batchnorm_role(TensorRole role);

/// Spatial hyperparameters shared by Conv and pooling layers.
struct Window {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  bool operator==(const Window&) const = default;
};

/// One node of a network. Layers consume the output of the previous layer
/// unless `input` names an earlier layer; the reserved name "@input" refers
/// to the network input. Add layers sum their input with the output of
/// `skip`.
struct Layer {
  std::string name;
  LayerKind kind = LayerKind::ReLU;
  std::map<TensorRole, Tensor> tensors;
  Window window;
  int groups = 1;      // Conv only
  float bn_eps = 1e-5F;  // BatchNorm only
  std::string input;
  std::string skip;

  const Tensor* find(TensorRole role) const;
  Tensor* find(TensorRole role);

  bool operator==(const Layer&) const = default;
};

inline constexpr std::string_view kNetworkInput = "@input";

struct Network {
  std::vector<Layer> layers;
  std::string arch_tag;

  const Layer* find(std::string_view name) const;
  Layer* find(std::string_view name);
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool operator==(const Network&) const = default;
};

/// Checks every structural invariant (unique names, tensor roles per kind,
/// kernel/weight consistency, wiring points backwards, finite payloads,
/// positive BN variance). Throws ManifestError describing the first violation.
void validate(const Network& net);

/// Conv and BN layers with every tensor materialized.
bool fully_materialized(const Network& net);

/// Layers, kinds, hyperparameters, wiring and tensor shapes agree.
bool same_architecture(const Network& a, const Network& b);

/// Input channels expected by the first conv layer.
int input_channels(const Network& net);

/// Convenience builders used by the architecture catalogue and tests.
Layer make_conv(std::string name, int in_channels, int out_channels, int kernel, int stride,
                int padding, bool bias, int groups = 1);
Layer make_batchnorm(std::string name, int channels);
Layer make_relu(std::string name);
Layer make_pool(std::string name, LayerKind kind, int kernel, int stride, int padding = 0);
Layer make_add(std::string name, std::string skip);

}  // namespace nncomp
