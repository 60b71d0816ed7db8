#include "nncomp/architectures.hpp"

#include <string>

namespace nncomp::arch {

Network alexnet() {
  Network n;
  n.arch_tag = "alexnet";
  auto& L = n.layers;
  L.push_back(make_conv("conv1", 3, 96, 11, 4, 0, true));
  L.push_back(make_relu("conv1_relu"));
  L.push_back(make_pool("pool1", LayerKind::MaxPool, 3, 2));
  L.push_back(make_conv("conv2", 96, 256, 5, 1, 2, true, 2));
  L.push_back(make_relu("conv2_relu"));
  L.push_back(make_pool("pool2", LayerKind::MaxPool, 3, 2));
  L.push_back(make_conv("conv3", 256, 384, 3, 1, 1, true));
  L.push_back(make_relu("conv3_relu"));
  L.push_back(make_conv("conv4", 384, 384, 3, 1, 1, true, 2));
  L.push_back(make_relu("conv4_relu"));
  L.push_back(make_conv("conv5", 384, 256, 3, 1, 1, true, 2));
  L.push_back(make_relu("conv5_relu"));
  L.push_back(make_pool("pool5", LayerKind::MaxPool, 3, 2));
  return n;
}

Network alexnet_listed() {
  Network n;
  n.arch_tag = "alexnet-listed";
  auto& L = n.layers;
  L.push_back(make_conv("conv1", 3, 96, 5, 2, 2, true));
  L.push_back(make_pool("pool1", LayerKind::MaxPool, 3, 2));
  L.push_back(make_conv("conv2", 96, 256, 3, 1, 1, true));
  L.push_back(make_pool("pool2", LayerKind::MaxPool, 3, 2));
  L.push_back(make_conv("conv3", 256, 384, 3, 1, 1, true));
  L.push_back(make_relu("conv3_relu"));
  L.push_back(make_conv("conv4", 384, 384, 3, 1, 1, true));
  L.push_back(make_conv("conv5", 384, 256, 3, 1, 1, true));
  L.push_back(make_pool("pool5", LayerKind::MaxPool, 3, 2));
  return n;
}

namespace {

void conv_bn(Network& n, const std::string& name, int in, int out, int kernel, int stride,
             bool relu, const std::string& input = {}) {
  auto conv = make_conv(name, in, out, kernel, stride, kernel / 2, false);
  conv.input = input;
  n.layers.push_back(std::move(conv));
  n.layers.push_back(make_batchnorm(name + "_bn", out));
  if (relu) n.layers.push_back(make_relu(name + "_relu"));
}

}  // namespace

Network resnet50() {
  Network n;
  n.arch_tag = "resnet50";
  conv_bn(n, "conv1", 3, 64, 7, 2, true);
  n.layers.push_back(make_pool("pool1", LayerKind::MaxPool, 3, 2, 1));
  struct Stage {
    int mid, out, blocks;
  };
  const Stage stages[] = {{64, 256, 3}, {128, 512, 4}, {256, 1024, 6}, {512, 2048, 3}};
  int in = 64;
  std::string block_input = "pool1";
  for (int s = 0; s < 4; ++s) {
    const auto& st = stages[s];
    for (int b = 0; b < st.blocks; ++b) {
      const std::string p = "res" + std::to_string(s + 2) + static_cast<char>('a' + b);
      const int stride = (b == 0 && s > 0) ? 2 : 1;
      conv_bn(n, p + "_branch2a", in, st.mid, 1, 1, true, block_input);
      conv_bn(n, p + "_branch2b", st.mid, st.mid, 3, stride, true);
      conv_bn(n, p + "_branch2c", st.mid, st.out, 1, 1, false);
      std::string skip = block_input;
      if (b == 0) {
        conv_bn(n, p + "_branch1", in, st.out, 1, stride, false, block_input);
        skip = p + "_branch1_bn";
        n.layers.push_back(make_add(p, skip));
        n.layers.back().input = p + "_branch2c_bn";
      } else {
        n.layers.push_back(make_add(p, skip));
      }
      n.layers.push_back(make_relu(p + "_relu"));
      block_input = p + "_relu";
      in = st.out;
    }
  }
  n.layers.push_back(make_pool("pool5", LayerKind::AvgPool, 7, 1));
  return n;
}

ResidualNet residual_net(const ResidualLayout& layout, std::string arch_tag) {
  ResidualNet out;
  Network& n = out.net;
  n.arch_tag = std::move(arch_tag);
  conv_bn(n, "conv1", layout.in_channels, layout.stem_channels, layout.stem_kernel,
          layout.stem_stride, true);
  std::string block_input = "conv1_relu";
  if (layout.stem_pool) {
    n.layers.push_back(make_pool("pool1", LayerKind::MaxPool, 3, 2, 1));
    block_input = "pool1";
  }
  int in = layout.stem_channels;
  for (std::size_t s = 0; s < layout.stages.size(); ++s) {
    const auto& st = layout.stages[s];
    const std::string stage = "conv" + std::to_string(s + 2);
    if (st.channels != in) {
      conv_bn(n, stage + "_t", in, st.channels, 3, layout.transition_stride, true);
      block_input = stage + "_t_relu";
    }
    TyingGroup group;
    group.repeat_count = st.blocks;
    for (int b = 0; b < st.blocks; ++b) {
      const std::string p = stage + "_" + std::to_string(b + 1);
      const std::size_t first = n.layers.size();
      conv_bn(n, p + "a", st.channels, st.channels, 3, 1, true);
      conv_bn(n, p + "b", st.channels, st.channels, 3, 1, false);
      n.layers.push_back(make_add(p + "_add", block_input));
      n.layers.push_back(make_relu(p + "_relu"));
      if (b == 0)
        for (std::size_t i = first; i < n.layers.size(); ++i)
          group.template_layers.push_back(n.layers[i].name);
      block_input = p + "_relu";
    }
    out.plan.groups.push_back(std::move(group));
    in = st.channels;
  }
  return out;
}

ResidualNet shared_resnet() {
  ResidualLayout layout;
  layout.stages = {{64, 2}, {128, 3}, {256, 10}, {512, 3}};
  return residual_net(layout, "shared-resnet");
}

Network plain_toy(int depth, int channels, int in_channels) {
  Network n;
  n.arch_tag = "plain-toy";
  for (int i = 1; i <= depth; ++i)
    conv_bn(n, "c" + std::to_string(i), i == 1 ? in_channels : channels, channels, 3, 1, true);
  return n;
}

ResidualNet residual_toy(const std::vector<ResidualStage>& stages, int stem_channels,
                         int in_channels) {
  ResidualLayout layout;
  layout.in_channels = in_channels;
  layout.stem_channels = stem_channels;
  layout.stem_kernel = 3;
  layout.stem_stride = 1;
  layout.stem_pool = false;
  layout.transition_stride = 1;
  layout.stages = stages;
  return residual_net(layout, "residual-toy");
}

}  // namespace nncomp::arch
