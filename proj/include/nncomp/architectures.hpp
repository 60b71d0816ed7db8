#pragma once

#include <vector>

#include "nncomp/network.hpp"
#include "nncomp/transform.hpp"

namespace nncomp::arch {

/// Convolutional trunk of AlexNet (fully connected layers discarded):
/// conv1 11x11/4 96, conv2 5x5 256 (2 groups), conv3 3x3 384,
/// conv4 3x3 384 (2 groups), conv5 3x3 256 (2 groups), with biases, ReLUs and
/// the pool1/pool2/pool5 max pools. Shape-only.
Network alexnet();

/// Nine-layer AlexNet-shaped net with the kernel listing 5x5/96, 3x3/256,
/// 3x3/384, 3x3/384, 3x3/256 and no grouping; layers conv1, pool1, conv2,
/// pool2, conv3, conv3_relu, conv4, conv5, pool5. Shape-only.
Network alexnet_listed();

/// ResNet-50 convolutional trunk: 7x7 stem, bottleneck stages of 3/4/6/3
/// blocks with projection shortcuts on each stage's first block. Shape-only.
Network resnet50();

struct ResidualStage {
  int channels = 0;
  int blocks = 1;
};

struct ResidualLayout {
  int in_channels = 3;
  int stem_channels = 64;
  int stem_kernel = 7;
  int stem_stride = 2;
  bool stem_pool = true;
  /// Stride of the transition conv that opens every stage whose channel
  /// count differs from its input.
  int transition_stride = 2;
  std::vector<ResidualStage> stages;
};

/// A residual network whose stages repeat a basic block (3x3, 3x3, identity
/// shortcut) `blocks` times, together with the plan that ties every stage's
/// blocks to its first block. Channel changes happen in a transition
/// 3x3 conv + BN + ReLU at the stage boundary.
struct ResidualNet {
  Network net;
  TyingPlan plan;
};

ResidualNet residual_net(const ResidualLayout& layout, std::string arch_tag);

/// Full-scale shared residual network: 7x7/64 stem, stages of 64/128/256/512
/// channels with 2, 3, 10 and 3 repeated blocks. Shape-only.
ResidualNet shared_resnet();

/// Desk-scale plain chain of `depth` (3x3 conv, BN, ReLU) units at constant
/// width; layers named c1, c1_bn, c1_relu, ...
Network plain_toy(int depth, int channels, int in_channels = 3);

/// Desk-scale residual net: 3x3 stem then the given stages at stride 1.
ResidualNet residual_toy(const std::vector<ResidualStage>& stages, int stem_channels,
                         int in_channels = 3);

}  // namespace nncomp::arch
