#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "nncomp/accounting.hpp"
#include "nncomp/architectures.hpp"
#include "nncomp/config.hpp"
#include "nncomp/transform.hpp"

using namespace nncomp;

namespace {

// Copies every tied repeat's tensors from its template so the network is
// exactly what untie() would rebuild.
Network share_weights(Network net, const TyingPlan& plan) {
  for (const auto& g : plan.groups) {
    const auto first = *net.index_of(g.template_layers.front());
    const auto len = g.template_layers.size();
    for (int r = 1; r < g.repeat_count; ++r)
      for (std::size_t i = 0; i < len; ++i)
        net.layers[first + static_cast<std::size_t>(r) * len + i].tensors = net.layers[first + i].tensors;
  }
  return net;
}

}  // namespace

TEST_CASE("prune_at") {
  const auto net = testutil::toy_chain(1, 5, 3, 4, false);
  SUBCASE("at the last layer is the identity") {
    CHECK(prune_at(net, net.layers.back().name) == net);
  }
  SUBCASE("output is a prefix ending at the cut") {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      const auto p = prune_at(net, net.layers[i].name);
      REQUIRE(p.layers.size() == i + 1);
      for (std::size_t j = 0; j <= i; ++j) CHECK(p.layers[j] == net.layers[j]);
    }
  }
  SUBCASE("accounting of a cut at conv2 is the first two convs") {
    const auto full = param_accounting(net);
    CHECK(param_accounting(prune_at(net, "c2")).conv_total ==
          full.layers[0].conv_total() + full.layers[1].conv_total());
    CHECK(full.layers[0].conv_total() == 4 * 3 * 9 + 4);
    CHECK(full.layers[1].conv_total() == 4 * 4 * 9 + 4);
  }
  SUBCASE("unknown layer") { CHECK_THROWS_AS(prune_at(net, "zz"), ArgumentError); }
}

TEST_CASE("AlexNet cut points give strictly increasing parameter totals") {
  for (const auto& net : {arch::alexnet(), arch::alexnet_listed()}) {
    std::int64_t prev = 0;
    for (const char* cut : {"pool1", "pool2", "conv3_relu", "pool5"}) {
      const auto total = param_accounting(prune_at(net, cut)).conv_total;
      CHECK(total > prev);
      prev = total;
    }
  }
}

TEST_CASE("trivial plan stores every layer once") {
  const auto net = testutil::toy_chain(2, 3, 3, 4, true);
  for (const auto& tn : {tie_blocks(net, TyingPlan{}), trivially_tied(net)}) {
    CHECK(tn.unique_layers == net);
    CHECK(untie(tn) == net);
    const auto c = shared_param_count(tn);
    CHECK(c.unique == c.expanded);
    for (std::size_t i = 0; i < tn.expansion.size(); ++i) CHECK(tn.expansion[i].template_name == net.layers[i].name);
  }
  TyingPlan ones;
  ones.groups.push_back({{"c1", "c1_bn"}, 1});
  CHECK(untie(tie_blocks(net, ones)) == net);
}

TEST_CASE("tied residual toy with 2/3/10/3 blocks") {
  auto rn = arch::residual_toy({{4, 2}, {6, 3}, {8, 10}, {8, 3}}, 4);
  const auto net = share_weights(synthesize_weights(rn.net, {3, 2, 8}), rn.plan);
  const auto tn = tie_blocks(net, rn.plan);
  const auto c = shared_param_count(tn);
  CHECK(c.expanded == param_accounting(net).conv_total);
  CHECK(c.unique < c.expanded);
  // expanded = unique + sum over groups of (r - 1) * block params
  std::int64_t extra = 0;
  for (const auto& g : rn.plan.groups) {
    std::int64_t block = 0;
    for (const auto& name : g.template_layers)
      for (const auto& lc : param_accounting(net).layers)
        if (lc.name == name) block += lc.conv_total();
    extra += (g.repeat_count - 1) * block;
  }
  CHECK(c.expanded == c.unique + extra);
  CHECK(c.unique == param_accounting(tn.unique_layers).conv_total);

  SUBCASE("untie restores the network and its forward pass") {
    const auto back = untie(tn);
    CHECK(back == net);
    const auto img = testutil::random_maps(4, 3, 9, 9);
    const auto a = forward<double>(net, img, net.layers.back().name);
    const auto b = forward<double>(back, img, back.layers.back().name);
    CHECK((a.maps - b.maps).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("plan text round trip") {
    CHECK(parse_tying_plan(to_text(rn.plan)) == rn.plan);
  }
}

TEST_CASE("one block repeated r times") {
  for (int r = 1; r <= 5; ++r) {
    auto rn = arch::residual_toy({{5, r}}, 5);
    const auto tn = tie_blocks(rn.net, rn.plan);
    const auto c = shared_param_count(tn);
    const std::int64_t block = 2 * (5 * 5 * 9);
    CHECK(c.expanded == c.unique + (r - 1) * block);
    CHECK((c.unique == c.expanded) == (r == 1));
  }
}

TEST_CASE("tying errors") {
  const auto rn = arch::residual_toy({{4, 3}}, 6);
  SUBCASE("shape mismatch") {
    TyingPlan p;
    p.groups.push_back({{"conv2_t", "conv2_t_bn", "conv2_t_relu"}, 2});
    CHECK_THROWS_AS(tie_blocks(rn.net, p), PlanError);
  }
  SUBCASE("unknown and non-contiguous templates") {
    TyingPlan p;
    p.groups.push_back({{"nope"}, 2});
    CHECK_THROWS_AS(tie_blocks(rn.net, p), PlanError);
    p.groups = {{{"conv2_1a", "conv2_1b"}, 2}};
    CHECK_THROWS_AS(tie_blocks(rn.net, p), PlanError);
  }
  SUBCASE("overlapping groups") {
    auto p = rn.plan;
    p.groups.push_back(rn.plan.groups[0]);
    CHECK_THROWS_AS(tie_blocks(rn.net, p), PlanError);
  }
  SUBCASE("too many repeats") {
    auto p = rn.plan;
    p.groups[0].repeat_count = 4;
    CHECK_THROWS_AS(tie_blocks(rn.net, p), PlanError);
  }
  SUBCASE("dangling expansion reference") {
    auto tn = tie_blocks(rn.net, rn.plan);
    tn.expansion[3].template_name = "ghost";
    CHECK_THROWS_AS(untie(tn), CorruptionError);
  }
  SUBCASE("malformed plan text") {
    CHECK_THROWS_AS(parse_tying_plan("group = x : a b\n"), ConfigError);
    CHECK_THROWS_AS(parse_tying_plan("group = 0 : a\n"), ConfigError);
    CHECK_THROWS_AS(parse_tying_plan("block = 2 : a\n"), ConfigError);
  }
}

TEST_CASE("full-scale shared residual network counts") {
  const auto rn = arch::shared_resnet();
  const auto c = shared_param_count(tie_blocks(rn.net, rn.plan));
  CHECK(c.unique == 7'824'576);
  CHECK(param_accounting(arch::resnet50()).conv_total == 23'454'912);
  const double ratio = double(param_accounting(arch::resnet50()).conv_total) / double(c.unique);
  CHECK(ratio > 2.9);
  CHECK(ratio < 3.1);
}
