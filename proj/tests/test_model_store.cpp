#include <filesystem>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "nncomp/accounting.hpp"
#include "nncomp/architectures.hpp"
#include "nncomp/model_io.hpp"

using namespace nncomp;

namespace {

Network toy2(std::uint64_t seed) {
  Network n;
  n.arch_tag = "toy2";
  n.layers.push_back(make_conv("conv1", 2, 4, 3, 1, 1, true));
  n.layers.push_back(make_relu("relu1"));
  n.layers.push_back(make_conv("conv2", 4, 3, 1, 1, 0, false));
  n.layers.push_back(make_batchnorm("bn2", 3));
  return synthesize_weights(n, {seed, 2, 8});
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("nncomp_model_store_" + name);
}

void replace_once(Bytes& b, const std::string& from, const std::string& to) {
  const std::string s(b.begin(), b.end());
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  REQUIRE(from.size() == to.size());
  std::copy(to.begin(), to.end(), b.begin() + static_cast<std::ptrdiff_t>(pos));
}

}  // namespace

TEST_CASE("save then load restores the network exactly") {
  const auto net = toy2(1);
  const auto p = temp_path("roundtrip.nnw");
  save_model(net, p);
  const auto back = load_model(p);
  CHECK(back == net);
  std::filesystem::remove(p);
}

TEST_CASE("round trip holds for random networks including shape-only tensors") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto net = testutil::random_toy(s);
    CHECK(decode_model(encode_model(net)) == net);
  }
  const auto big = arch::resnet50();
  CHECK(decode_model(encode_model(big)) == big);
}

TEST_CASE("saving twice gives byte-identical files") {
  const auto net = toy2(2);
  const auto a = temp_path("a.nnw");
  const auto b = temp_path("b.nnw");
  save_model(net, a);
  save_model(net, b);
  CHECK(read_file(a) == read_file(b));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("bad magic is a format error") {
  auto bytes = encode_model(toy2(3));
  bytes[0] = 'X';
  bytes[1] = 'X';
  bytes[2] = 'X';
  bytes[3] = 'X';
  CHECK_THROWS_AS(decode_model(bytes), FormatError);
}

TEST_CASE("truncated data is a corruption error") {
  const auto bytes = encode_model(toy2(4));
  for (std::size_t cut : {std::size_t{6}, bytes.size() / 2, bytes.size() - 1}) {
    Bytes part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(decode_model(part), CorruptionError);
  }
}

TEST_CASE("a flipped payload byte fails the checksum") {
  auto bytes = encode_model(toy2(5));
  bytes[bytes.size() - 10] ^= 0x40;
  CHECK_THROWS_AS(decode_model(bytes), CorruptionError);
}

TEST_CASE("duplicate layer name in the manifest is a manifest error") {
  Network n;
  n.layers.push_back(make_relu("aa"));
  n.layers.push_back(make_relu("bb"));
  auto bytes = encode_model(n);
  replace_once(bytes, "\"bb\"", "\"aa\"");
  CHECK_THROWS_AS(decode_model(bytes), ManifestError);
}

TEST_CASE("unwritable path is an I/O error") {
  CHECK_THROWS_AS(save_model(toy2(6), "/nonexistent-dir/x/y.nnw"), IoError);
  CHECK_THROWS_AS(load_model("/nonexistent-dir/x/y.nnw"), IoError);
}

TEST_CASE("invalid networks are rejected") {
  auto net = toy2(7);
  SUBCASE("non-finite value") {
    net.layers[0].tensors.at(TensorRole::ConvWeight).data[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(validate(net), ManifestError);
  }
  SUBCASE("non-positive BN variance") {
    net.layers[3].tensors.at(TensorRole::BnVar).data[1] = 0.0F;
    CHECK_THROWS_AS(validate(net), ManifestError);
  }
  SUBCASE("shape and data disagree") {
    net.layers[0].tensors.at(TensorRole::ConvWeight).data.pop_back();
    CHECK_THROWS_AS(validate(net), ManifestError);
  }
  SUBCASE("kernel dims disagree with the weight") {
    net.layers[0].window.kernel_h = 5;
    CHECK_THROWS_AS(validate(net), ManifestError);
  }
  SUBCASE("tensors on a ReLU") {
    net.layers[1].tensors[TensorRole::ConvBias] = Tensor({1}, {0.0F});
    CHECK_THROWS_AS(validate(net), ManifestError);
  }
}

TEST_CASE("listed AlexNet geometry has five convs with the listed kernels") {
  const auto net = decode_model(encode_model(arch::alexnet_listed()));
  CHECK(net.layers.size() == 9);
  std::vector<std::pair<int, std::int64_t>> convs;
  for (const auto& l : net.layers)
    if (l.kind == LayerKind::Conv) convs.emplace_back(l.window.kernel_h, l.find(TensorRole::ConvWeight)->shape[0]);
  const std::vector<std::pair<int, std::int64_t>> expected{{5, 96}, {3, 256}, {3, 384}, {3, 384}, {3, 256}};
  CHECK(convs == expected);
}

TEST_CASE("param accounting") {
  SUBCASE("empty network") {
    const auto a = param_accounting(Network{});
    CHECK(a.conv_total == 0);
    CHECK(a.layers.empty());
  }
  SUBCASE("3x3 conv from 2 to 4 channels") {
    Network n;
    n.layers.push_back(make_conv("c", 2, 4, 3, 1, 1, true));
    const auto a = param_accounting(n);
    REQUIRE(a.layers.size() == 1);
    CHECK(a.layers[0].conv_weights == 4 * 3 * 3 * 2);
    CHECK(a.layers[0].conv_bias == 4);
    CHECK(a.conv_total == 76);
  }
  SUBCASE("BN reported separately") {
    const auto a = param_accounting(toy2(8));
    CHECK(a.conv_total == 4 * 2 * 9 + 4 + 3 * 4);
    CHECK(a.batchnorm_total == 4 * 3);
  }
  SUBCASE("AlexNet trunk is about 2.3M conv parameters") {
    const auto a = param_accounting(arch::alexnet());
    CHECK(a.conv_total == 2'334'080);
    std::int64_t sum = 0;
    for (const auto& l : a.layers) sum += l.conv_total();
    CHECK(sum == a.conv_total);
  }
}

TEST_CASE("param accounting is additive over concatenation") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = testutil::random_toy(s);
    auto b = testutil::random_toy(s + 100);
    Network joined = a;
    for (auto l : b.layers) {
      l.name = "b_" + l.name;
      if (!l.skip.empty()) l.skip = "b_" + l.skip;
      joined.layers.push_back(l);
    }
    const auto ja = param_accounting(joined);
    CHECK(ja.conv_total == param_accounting(a).conv_total + param_accounting(b).conv_total);
    CHECK(ja.batchnorm_total == param_accounting(a).batchnorm_total + param_accounting(b).batchnorm_total);
  }
}
