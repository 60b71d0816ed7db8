#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nncomp/network.hpp"

namespace nncomp {

/// Returns the prefix of `net` ending at `layer_name` inclusive. Everything
/// after the cut, including BN/ReLU layers that followed it, is dropped.
Network prune_at(const Network& net, std::string_view layer_name);

/// One tied group: the template block is a contiguous run of layers; the
/// (repeat_count - 1) blocks that follow it in network order must match it
/// layer by layer and will share its tensors.
struct TyingGroup {
  std::vector<std::string> template_layers;
  int repeat_count = 1;
  bool operator==(const TyingGroup&) const = default;
};

struct TyingPlan {
  std::vector<TyingGroup> groups;
  bool operator==(const TyingPlan&) const = default;
};

/// One materialized layer of a tied network: its own name and wiring, and
/// the unique layer whose tensors and hyperparameters it reuses.
struct ExpansionEntry {
  std::string name;
  std::string template_name;
  int repeat = 0;
  std::string input;
  std::string skip;
  bool operator==(const ExpansionEntry&) const = default;
};

struct TiedNetwork {
  Network unique_layers;
  std::vector<ExpansionEntry> expansion;
  bool operator==(const TiedNetwork&) const = default;
};

/// Throws PlanError when a group's template is missing, not contiguous,
/// overlaps another group, or its repeats do not match in kind,
/// hyperparameters and tensor shapes.
TiedNetwork tie_blocks(const Network& net, const TyingPlan& plan);

/// Materializes the expansion; repeats carry copies of their template's
/// tensors. Throws CorruptionError on a dangling template reference.
Network untie(const TiedNetwork& tn);

struct SharedParamCount {
  std::int64_t unique = 0;  // conv weights + biases stored once
  std::int64_t expanded = 0;  // conv weights + biases as if materialized
  std::int64_t unique_batchnorm = 0;
  std::int64_t expanded_batchnorm = 0;
};

SharedParamCount shared_param_count(const TiedNetwork& tn);

/// Plan with no sharing: every layer is its own group of one.
TiedNetwork trivially_tied(const Network& net);

}  // namespace nncomp
