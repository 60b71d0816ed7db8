#include "nncomp/transform.hpp"

#include <map>

#include "nncomp/accounting.hpp"
#include "nncomp/error.hpp"

namespace nncomp {

Network prune_at(const Network& net, std::string_view layer_name) {
  const auto idx = net.index_of(layer_name);
  if (!idx) throw ArgumentError("cannot prune at unknown layer '" + std::string(layer_name) + "'");
  Network out;
  out.arch_tag = net.arch_tag;
  out.layers.assign(net.layers.begin(), net.layers.begin() + static_cast<std::ptrdiff_t>(*idx) + 1);
  return out;
}

namespace {

bool structurally_equal(const Layer& a, const Layer& b) {
  if (a.kind != b.kind || !(a.window == b.window) || a.groups != b.groups || a.bn_eps != b.bn_eps ||
      a.tensors.size() != b.tensors.size())
    return false;
  for (const auto& [role, t] : a.tensors) {
    const auto* u = b.find(role);
    if (!u || u->shape != t.shape) return false;
  }
  return true;
}

}  // namespace

TiedNetwork tie_blocks(const Network& net, const TyingPlan& plan) {
  // For each network position: (group, repeat, offset) if covered by a group.
  struct Slot {
    int group = -1;
    int repeat = 0;
    std::size_t offset = 0;
  };
  std::vector<Slot> slots(net.layers.size());

  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    const auto& group = plan.groups[g];
    const std::string label = "tying group " + std::to_string(g);
    if (group.template_layers.empty()) throw PlanError(label + ": empty template");
    if (group.repeat_count < 1) throw PlanError(label + ": repeat count must be >= 1");
    const auto first = net.index_of(group.template_layers.front());
    if (!first)
      throw PlanError(label + ": unknown layer '" + group.template_layers.front() + "'");
    const std::size_t len = group.template_layers.size();
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t pos = *first + i;
      if (pos >= net.layers.size() || net.layers[pos].name != group.template_layers[i])
        throw PlanError(label + ": template layers must be contiguous in network order (at '" +
                        group.template_layers[i] + "')");
    }
    const std::size_t end = *first + len * static_cast<std::size_t>(group.repeat_count);
    if (end > net.layers.size())
      throw PlanError(label + ": network has too few layers for " +
                      std::to_string(group.repeat_count) + " repeats");
    for (std::size_t pos = *first; pos < end; ++pos) {
      if (slots[pos].group >= 0)
        throw PlanError(label + ": layer '" + net.layers[pos].name + "' already belongs to group " +
                        std::to_string(slots[pos].group));
      const std::size_t offset = (pos - *first) % len;
      const auto& tmpl = net.layers[*first + offset];
      if (!structurally_equal(tmpl, net.layers[pos]))
        throw PlanError(label + ": layer '" + net.layers[pos].name +
                        "' does not match template layer '" + tmpl.name + "'");
      slots[pos] = {static_cast<int>(g), static_cast<int>((pos - *first) / len), offset};
    }
  }

  TiedNetwork tn;
  tn.unique_layers.arch_tag = net.arch_tag;
  for (std::size_t pos = 0; pos < net.layers.size(); ++pos) {
    const auto& layer = net.layers[pos];
    const auto& slot = slots[pos];
    ExpansionEntry e{layer.name, layer.name, slot.repeat, layer.input, layer.skip};
    if (slot.group >= 0 && slot.repeat > 0)
      e.template_name = plan.groups[static_cast<std::size_t>(slot.group)].template_layers[slot.offset];
    else
      tn.unique_layers.layers.push_back(layer);
    tn.expansion.push_back(std::move(e));
  }
  return tn;
}

Network untie(const TiedNetwork& tn) {
  std::map<std::string_view, const Layer*> by_name;
  for (const auto& l : tn.unique_layers.layers) by_name[l.name] = &l;
  Network net;
  net.arch_tag = tn.unique_layers.arch_tag;
  net.layers.reserve(tn.expansion.size());
  for (const auto& e : tn.expansion) {
    auto it = by_name.find(e.template_name);
    if (it == by_name.end())
      throw CorruptionError("expansion entry '" + e.name + "' references unknown template '" +
                            e.template_name + "'");
    Layer l = *it->second;
    l.name = e.name;
    l.input = e.input;
    l.skip = e.skip;
    net.layers.push_back(std::move(l));
  }
  return net;
}

SharedParamCount shared_param_count(const TiedNetwork& tn) {
  SharedParamCount out;
  std::map<std::string, LayerParamCount, std::less<>> per_layer;
  for (auto& c : param_accounting(tn.unique_layers).layers) {
    out.unique += c.conv_total();
    out.unique_batchnorm += c.batchnorm;
    per_layer[c.name] = c;
  }
  for (const auto& e : tn.expansion) {
    auto it = per_layer.find(e.template_name);
    if (it == per_layer.end()) continue;
    out.expanded += it->second.conv_total();
    out.expanded_batchnorm += it->second.batchnorm;
  }
  return out;
}

TiedNetwork trivially_tied(const Network& net) { return tie_blocks(net, TyingPlan{}); }

}  // namespace nncomp
