#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nncomp/network.hpp"

namespace nncomp {

/// C maps of H x W, one map per row, each stored row-major (y * W + x).
template <typename Scalar>
struct FeatureMaps {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Eigen::Index height = 0;
  Eigen::Index width = 0;
  Matrix maps;

  FeatureMaps() = default;
  FeatureMaps(Eigen::Index channels, Eigen::Index h, Eigen::Index w)
      : height(h), width(w), maps(Matrix::Zero(channels, h * w)) {}

  Eigen::Index channels() const { return maps.rows(); }
  Scalar& at(Eigen::Index c, Eigen::Index y, Eigen::Index x) { return maps(c, y * width + x); }
  Scalar at(Eigen::Index c, Eigen::Index y, Eigen::Index x) const { return maps(c, y * width + x); }

  template <typename Other>
  FeatureMaps<Other> cast() const {
    FeatureMaps<Other> f;
    f.height = height;
    f.width = width;
    f.maps = maps.template cast<Other>();
    return f;
  }
};

/// Pixel values in [0, 1].
using Image = FeatureMaps<float>;

/// Throws ShapeError for empty dims and ArgumentError for non-finite or
/// out-of-range pixels.
void validate_image(const Image& img);

/// Runs layers up to and including `upto`: cross-correlation conv (grouped,
/// zero padded), BN as (x - mean) / sqrt(var + eps) * scale + bias, ReLU,
/// max/avg pooling (padding excluded from the window), residual add.
template <typename Scalar>
FeatureMaps<Scalar> forward(const Network& net, const FeatureMaps<Scalar>& input, std::string_view upto);

/// Counter-clockwise rotation by `quarter_turns` x 90 degrees.
template <typename Scalar>
FeatureMaps<Scalar> rot90(const FeatureMaps<Scalar>& f, int quarter_turns);

template <typename Scalar>
FeatureMaps<Scalar> crop(const FeatureMaps<Scalar>& f, Eigen::Index y, Eigen::Index x, Eigen::Index h,
                         Eigen::Index w);

enum class TransformGroup : std::uint8_t { Rotation, Scale, Translation };
enum class Moment : std::uint8_t { Average, Std, Max };

std::string_view to_string(TransformGroup g);
std::string_view to_string(Moment m);

struct NipStage {
  TransformGroup group;
  Moment moment;
  bool operator==(const NipStage&) const = default;
};

/// Parses "A:scale,S:translation,M:rotation" (moment letter A, S or M).
std::vector<NipStage> parse_stages(std::string_view text);

struct Roi {
  Eigen::Index y = 0;
  Eigen::Index x = 0;
  Eigen::Index side = 0;
  bool operator==(const Roi&) const = default;
};

struct NipConfig {
  std::vector<NipStage> stages;  // innermost first
  std::vector<int> rotations;    // degrees, multiples of 90
  std::vector<double> scales;    // ROI side as a fraction of min(H, W)
  int rois_per_scale = 1;

  /// 4 rotations x scales {1, 0.75, 0.5} x 20 ROIs; average over scale,
  /// std over translation, max over rotation.
  static NipConfig defaults();
  /// A single untransformed view.
  static NipConfig identity();
};

/// Throws ConfigError for empty or repeated stages, rotations that are not
/// multiples of 90 degrees, scales outside (0, 1] or rois_per_scale < 1.
void validate(const NipConfig& cfg);

/// Square ROIs of side max(1, floor(s * min(H, W))) on a rows x cols grid,
/// rows the largest divisor of n not above sqrt(n), spread evenly over the
/// image with both ends touching the borders.
std::vector<Roi> roi_grid(Eigen::Index height, Eigen::Index width, double scale, int count);

/// Feature maps for every (rotation, scale, roi) view: the input is rotated,
/// the ROI cropped from the rotated input, then forwarded.
template <typename Scalar>
struct TransformedStack {
  int rotations = 0;
  int scales = 0;
  int rois = 0;
  std::vector<FeatureMaps<Scalar>> maps;

  std::size_t index(int r, int s, int t) const {
    return (static_cast<std::size_t>(r) * static_cast<std::size_t>(scales) + static_cast<std::size_t>(s)) *
               static_cast<std::size_t>(rois) +
           static_cast<std::size_t>(t);
  }
  const FeatureMaps<Scalar>& at(int r, int s, int t) const { return maps[index(r, s, t)]; }
};

template <typename Scalar>
TransformedStack<Scalar> extract_transformed_stack(const Network& net, const FeatureMaps<Scalar>& img,
                                                   std::string_view upto, const NipConfig& cfg);

/// Per-channel spatial means of every view: channels x (R * S * T), column
/// index as TransformedStack::index.
template <typename Scalar>
struct ChannelStack {
  int rotations = 0;
  int scales = 0;
  int rois = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> means;
};

template <typename Scalar>
ChannelStack<Scalar> channel_means(const TransformedStack<Scalar>& stack);

template <typename Scalar>
struct Descriptor {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;
  bool zero = false;  // all-zero vector, left unnormalized
};

/// Applies the stages innermost-first, each reducing its axis per channel,
/// then L2-normalizes. Std is the population standard deviation. A stage
/// naming an already pooled group, or an unpooled axis of size > 1, is a
/// ConfigError.
template <typename Scalar>
Descriptor<Scalar> nip_pool(const ChannelStack<Scalar>& stack, std::span<const NipStage> stages);

template <typename Scalar>
Descriptor<Scalar> nip_pool(const TransformedStack<Scalar>& stack, std::span<const NipStage> stages);

template <typename Scalar>
Descriptor<Scalar> nip_descriptor(const Network& net, const FeatureMaps<Scalar>& img, std::string_view upto,
                                  const NipConfig& cfg);

struct DriftReport {
  double mean_cosine = 1.0;
  double mean_l2_gap = 0.0;
};

/// Cosine similarity of two descriptors; 1 when both are zero, 0 when only
/// one is.
template <typename Scalar>
double cosine(const Descriptor<Scalar>& a, const Descriptor<Scalar>& b);

/// Compares descriptors of the same images under two weight sets. Throws
/// ArgumentError when the architectures differ.
template <typename Scalar>
DriftReport descriptor_drift(const Network& a, const Network& b, std::span<const FeatureMaps<Scalar>> images,
                             std::string_view upto, const NipConfig& cfg);

#define NNCOMP_NETFORWARD_EXTERN(S)                                                                          \
  extern template FeatureMaps<S> forward(const Network&, const FeatureMaps<S>&, std::string_view);           \
  extern template FeatureMaps<S> rot90(const FeatureMaps<S>&, int);                                          \
  extern template FeatureMaps<S> crop(const FeatureMaps<S>&, Eigen::Index, Eigen::Index, Eigen::Index,       \
                                      Eigen::Index);                                                         \
  extern template TransformedStack<S> extract_transformed_stack(const Network&, const FeatureMaps<S>&,       \
                                                                std::string_view, const NipConfig&);         \
  extern template ChannelStack<S> channel_means(const TransformedStack<S>&);                                 \
  extern template Descriptor<S> nip_pool(const ChannelStack<S>&, std::span<const NipStage>);                 \
  extern template Descriptor<S> nip_pool(const TransformedStack<S>&, std::span<const NipStage>);             \
  extern template Descriptor<S> nip_descriptor(const Network&, const FeatureMaps<S>&, std::string_view,      \
                                               const NipConfig&);                                            \
  extern template double cosine(const Descriptor<S>&, const Descriptor<S>&);                                 \
  extern template DriftReport descriptor_drift(const Network&, const Network&, std::span<const FeatureMaps<S>>, \
                                               std::string_view, const NipConfig&);

NNCOMP_NETFORWARD_EXTERN(float)
NNCOMP_NETFORWARD_EXTERN(double)
#undef NNCOMP_NETFORWARD_EXTERN

}  // namespace nncomp
