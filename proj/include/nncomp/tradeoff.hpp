#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nncomp/netforward.hpp"
#include "nncomp/pipeline.hpp"

namespace nncomp {

struct TradeoffOptions {
  std::vector<int> bits;
  std::vector<std::string> cuts;
  Coding coding = Coding::Fixed;
  bool bn_exempt = true;
  std::optional<TyingPlan> tying;
  std::uint64_t seed = 0;
  int images = 8;
  int image_size = 16;
  NipConfig nip = NipConfig::defaults();
  /// When set, each container is written as b<bits>_<cut>.nnz here.
  std::optional<std::filesystem::path> out_dir;
};

struct TradeoffRow {
  int bits = 0;
  std::string cut;
  std::uint64_t bytes = 0;
  double log10_bytes = 0.0;
  double mean_cosine = 0.0;
  double mean_l2_gap = 0.0;
};

/// One row per (bits, cut): uniform scalar quantization of the network
/// pruned at `cut`, with NIP descriptor drift against the uncompressed
/// network on seeded synthetic images. Rows are ordered by cut, then bits.
std::vector<TradeoffRow> tradeoff_grid(const Network& net, const TradeoffOptions& opts);

/// Header `bits,cut,bytes,log10_bytes,mean_cosine,mean_l2_gap`.
std::string to_csv(const std::vector<TradeoffRow>& rows);

}  // namespace nncomp
