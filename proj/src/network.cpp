#include "nncomp/network.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "nncomp/error.hpp"

namespace nncomp {

void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string msg = context + ": " + e.what();
  if (dynamic_cast<const FormatError*>(&e)) throw FormatError(msg);
  if (dynamic_cast<const CorruptionError*>(&e)) throw CorruptionError(msg);
  if (dynamic_cast<const ManifestError*>(&e)) throw ManifestError(msg);
  if (dynamic_cast<const ArgumentError*>(&e)) throw ArgumentError(msg);
  if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(msg);
  if (dynamic_cast<const ShapeError*>(&e)) throw ShapeError(msg);
  if (dynamic_cast<const PlanError*>(&e)) throw PlanError(msg);
  if (dynamic_cast<const IoError*>(&e)) throw IoError(msg);
  if (dynamic_cast<const DegenerateError*>(&e)) throw DegenerateError(msg);
  throw Error(msg);
}

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

constexpr std::string_view kRoleNames[] = {"weight", "bias", "bn_scale", "bn_bias", "bn_mean",
                                           "bn_var"};
constexpr std::string_view kKindNames[] = {"conv", "batchnorm", "relu", "maxpool", "avgpool",
                                           "add"};

}  // namespace

std::string_view to_string(TensorRole role) { return kRoleNames[static_cast<int>(role)]; }
std::string_view to_string(LayerKind kind) { return kKindNames[static_cast<int>(kind)]; }

TensorRole parse_role(std::string_view text) {
  for (int i = 0; i < 6; ++i)
    if (kRoleNames[i] == text) return static_cast<TensorRole>(i);
  throw ManifestError("unknown tensor role '" + std::string(text) + "'");
}

LayerKind parse_layer_kind(std::string_view text) {
  for (int i = 0; i < 6; ++i)
    if (kKindNames[i] == text) return static_cast<LayerKind>(i);
  throw ManifestError("unknown layer kind '" + std::string(text) + "'");
}

bool is_batchnorm_role(TensorRole role) {
  return role == TensorRole::BnScale || role == TensorRole::BnBias || role == TensorRole::BnMean ||
         role == TensorRole::BnVar;
}

const Tensor* Layer::find(TensorRole role) const {
  auto it = tensors.find(role);
  return it == tensors.end() ? nullptr : &it->second;
}

Tensor* Layer::find(TensorRole role) {
  auto it = tensors.find(role);
  return it == tensors.end() ? nullptr : &it->second;
}

const Layer* Network::find(std::string_view name) const {
  for (const auto& l : layers)
    if (l.name == name) return &l;
  return nullptr;
}

Layer* Network::find(std::string_view name) {
  for (auto& l : layers)
    if (l.name == name) return &l;
  return nullptr;
}

std::optional<std::size_t> Network::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return i;
  return std::nullopt;
}

namespace {

void check_tensor(const Layer& layer, TensorRole role, const Tensor& t) {
  const std::string where = "layer '" + layer.name + "' tensor " + std::string(to_string(role));
  if (t.shape.empty()) throw ManifestError(where + ": empty shape");
  for (auto d : t.shape)
    if (d <= 0) throw ManifestError(where + ": non-positive dimension");
  if (!t.materialized()) return;
  if (static_cast<std::int64_t>(t.data.size()) != t.size())
    throw ManifestError(where + ": payload length does not match shape");
  for (float v : t.data)
    if (!std::isfinite(v)) throw ManifestError(where + ": non-finite value");
  if (role == TensorRole::BnVar)
    for (float v : t.data)
      if (!(v > 0.0F)) throw ManifestError(where + ": variance must be positive");
}

void check_roles(const Layer& layer, std::initializer_list<TensorRole> required,
                 std::initializer_list<TensorRole> optional) {
  for (auto r : required)
    if (!layer.find(r))
      throw ManifestError("layer '" + layer.name + "' is missing tensor " +
                          std::string(to_string(r)));
  for (const auto& [role, _] : layer.tensors) {
    bool ok = false;
    for (auto r : required) ok |= (r == role);
    for (auto r : optional) ok |= (r == role);
    if (!ok)
      throw ManifestError("layer '" + layer.name + "' may not carry tensor " +
                          std::string(to_string(role)));
  }
}

}  // namespace

void validate(const Network& net) {
  std::set<std::string> seen;
  for (const auto& layer : net.layers) {
    if (layer.name.empty()) throw ManifestError("layer with empty name");
    if (layer.name == kNetworkInput) throw ManifestError("layer name '@input' is reserved");
    if (!seen.insert(layer.name).second)
      throw ManifestError("duplicate layer name '" + layer.name + "'");

    auto check_ref = [&](const std::string& ref, const char* what) {
      if (ref.empty() || ref == kNetworkInput) return;
      if (!seen.count(ref) || ref == layer.name)
        throw ManifestError("layer '" + layer.name + "' " + what + " '" + ref +
                            "' does not name an earlier layer");
    };
    check_ref(layer.input, "input");
    check_ref(layer.skip, "skip");

    for (const auto& [role, t] : layer.tensors) check_tensor(layer, role, t);

    switch (layer.kind) {
      case LayerKind::Conv: {
        check_roles(layer, {TensorRole::ConvWeight}, {TensorRole::ConvBias});
        const auto& w = *layer.find(TensorRole::ConvWeight);
        if (w.shape.size() != 4) throw ManifestError("layer '" + layer.name + "': weight must be 4-D");
        if (w.shape[2] != layer.window.kernel_h || w.shape[3] != layer.window.kernel_w)
          throw ManifestError("layer '" + layer.name + "': kernel dims disagree with weight shape " +
                              shape_to_string(w.shape));
        if (layer.groups < 1 || w.shape[0] % layer.groups != 0)
          throw ManifestError("layer '" + layer.name + "': invalid group count");
        if (const auto* b = layer.find(TensorRole::ConvBias);
            b && (b->shape.size() != 1 || b->shape[0] != w.shape[0]))
          throw ManifestError("layer '" + layer.name + "': bias shape disagrees with weight");
        break;
      }
      case LayerKind::BatchNorm: {
        check_roles(layer,
                    {TensorRole::BnScale, TensorRole::BnBias, TensorRole::BnMean, TensorRole::BnVar},
                    {});
        const auto& s = layer.find(TensorRole::BnScale)->shape;
        for (const auto& [role, t] : layer.tensors)
          if (t.shape != s || s.size() != 1)
            throw ManifestError("layer '" + layer.name + "': BN tensors must share a 1-D shape");
        break;
      }
      case LayerKind::ReLU:
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
      case LayerKind::Add:
        if (!layer.tensors.empty())
          throw ManifestError("layer '" + layer.name + "' of kind " +
                              std::string(to_string(layer.kind)) + " may not carry tensors");
        break;
    }
    if (layer.kind == LayerKind::Add && layer.skip.empty())
      throw ManifestError("add layer '" + layer.name + "' needs a skip source");
    if (layer.kind != LayerKind::Add && !layer.skip.empty())
      throw ManifestError("layer '" + layer.name + "': only add layers take a skip source");
    const auto& w = layer.window;
    if (w.kernel_h < 1 || w.kernel_w < 1 || w.stride < 1 || w.padding < 0)
      throw ManifestError("layer '" + layer.name + "': invalid window");
  }
}

bool fully_materialized(const Network& net) {
  for (const auto& l : net.layers)
    for (const auto& [role, t] : l.tensors)
      if (!t.materialized()) return false;
  return true;
}

bool same_architecture(const Network& a, const Network& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& x = a.layers[i];
    const auto& y = b.layers[i];
    if (x.name != y.name || x.kind != y.kind || !(x.window == y.window) || x.groups != y.groups ||
        x.input != y.input || x.skip != y.skip || x.tensors.size() != y.tensors.size())
      return false;
    for (const auto& [role, t] : x.tensors) {
      const auto* u = y.find(role);
      if (!u || u->shape != t.shape) return false;
    }
  }
  return true;
}

Layer make_conv(std::string name, int in_channels, int out_channels, int kernel, int stride,
                int padding, bool bias, int groups) {
  Layer l;
  l.name = std::move(name);
  l.kind = LayerKind::Conv;
  l.window = {kernel, kernel, stride, padding};
  l.groups = groups;
  l.tensors[TensorRole::ConvWeight] =
      Tensor::shape_only({out_channels, in_channels / groups, kernel, kernel});
  if (bias) l.tensors[TensorRole::ConvBias] = Tensor::shape_only({out_channels});
  return l;
}

Layer make_batchnorm(std::string name, int channels) {
  Layer l;
  l.name = std::move(name);
  l.kind = LayerKind::BatchNorm;
  for (auto r : {TensorRole::BnScale, TensorRole::BnBias, TensorRole::BnMean, TensorRole::BnVar})
    l.tensors[r] = Tensor::shape_only({channels});
  return l;
}

Layer make_relu(std::string name) {
  Layer l;
  l.name = std::move(name);
  l.kind = LayerKind::ReLU;
  return l;
}

Layer make_pool(std::string name, LayerKind kind, int kernel, int stride, int padding) {
  Layer l;
  l.name = std::move(name);
  l.kind = kind;
  l.window = {kernel, kernel, stride, padding};
  return l;
}

Layer make_add(std::string name, std::string skip) {
  Layer l;
  l.name = std::move(name);
  l.kind = LayerKind::Add;
  l.skip = std::move(skip);
  return l;
}

int input_channels(const Network& net) {
  for (const auto& l : net.layers)
    if (l.kind == LayerKind::Conv)
      if (const Tensor* w = l.find(TensorRole::ConvWeight); w && w->shape.size() == 4)
        return static_cast<int>(w->shape[1] * l.groups);
  throw ArgumentError("network has no conv layer to infer input channels from");
}

}  // namespace nncomp
