#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nncomp/netforward.hpp"
#include "nncomp/network.hpp"

namespace nncomp {

/// Synthetic image, each channel independently:
///   clamp(0.5 + sum_{j<4} a_j sin(2 pi (u_j x / W + v_j y / H) + phi_j) + e(x, y), 0, 1)
/// with a_j ~ U(0.05, 0.2), u_j, v_j ~ U(-3, 3), phi_j ~ U(0, 2 pi) and pixel
/// noise e ~ U(-0.05, 0.05), all drawn from Rng(seed) in that order.
Image synthetic_image(std::uint64_t seed, int channels, int height, int width);

/// `count` images with seeds derive_seed(seed, "image/<i>").
std::vector<Image> synthetic_images(std::uint64_t seed, int count, int channels, int height, int width);

struct SynthOptions {
  std::uint64_t seed = 0;
  int calibration_images = 4;
  int calibration_size = 16;  // square side of calibration images
};

/// Fills every tensor of a shape-only network. Conv weights ~ Laplace(0, b)
/// with b = 1/sqrt(fan_in) (variance 2/fan_in); biases ~ Laplace(0, 0.02).
/// BN mean and variance are calibrated layer by layer from forward
/// statistics of synthetic images so each BN normalizes its input; BN scale
/// ~ U(0.5, 1.5) and bias ~ U(-0.25, 0.25). Draws use per-tensor seeds
/// derived from `seed` and the layer/role label.
Network synthesize_weights(const Network& shape_only, const SynthOptions& opts);

/// Reads binary (P5/P6) or ASCII (P2/P3) portable graymap/pixmap files.
Image read_pnm(const std::filesystem::path& path);
/// Writes P5 for one channel and P6 for three, at 8 bits.
void write_pnm(const std::filesystem::path& path, const Image& img);

}  // namespace nncomp
