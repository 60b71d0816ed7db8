#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "nncomp/network.hpp"

namespace nncomp {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TrainOptions {
  double tol = 1e-8;  // stop once the relative distortion improvement drops below this
  int max_iter = 200;
  std::uint64_t seed = 0;
};

/// Per-iteration distortion (mean squared error per block) observed by the
/// assignment step, ending with the distortion of the returned codebook.
struct TrainReport {
  std::vector<double> distortion;
  bool converged = false;

  double final_distortion() const { return distortion.empty() ? 0.0 : distortion.back(); }
};

/// Sorted, strictly increasing centroids; nearest-neighbour decision rule
/// with ties resolved toward the lower index.
class ScalarQuantizer {
 public:
  explicit ScalarQuantizer(Eigen::VectorXf centroids);

  const Eigen::VectorXf& centroids() const { return centroids_; }
  std::size_t size() const { return static_cast<std::size_t>(centroids_.size()); }
  std::uint32_t nearest(float x) const;
  /// Midpoints between adjacent centroids.
  Eigen::VectorXd boundaries() const;

  bool operator==(const ScalarQuantizer& o) const { return centroids_ == o.centroids_; }

 private:
  Eigen::VectorXf centroids_;
};

/// k x d codebook; blocks map to the nearest row in Euclidean distance,
/// ties toward the lower index.
class VectorQuantizer {
 public:
  explicit VectorQuantizer(RowMatrixXf codebook);

  const RowMatrixXf& codebook() const { return codebook_; }
  std::size_t size() const { return static_cast<std::size_t>(codebook_.rows()); }
  int dim() const { return static_cast<int>(codebook_.cols()); }
  std::uint32_t nearest(const float* block) const;

  bool operator==(const VectorQuantizer& o) const { return codebook_ == o.codebook_; }

 private:
  RowMatrixXf codebook_;
};

/// Quantizer indices for one tensor. For vector quantization the flattened
/// tensor is zero-padded by `pad_count` values to a whole number of blocks.
struct IndexTensor {
  Shape shape;
  std::vector<std::uint32_t> indices;
  int block_dim = 1;
  int pad_count = 0;

  bool operator==(const IndexTensor&) const = default;
};

/// Lloyd-Max training on scalar samples. With no more distinct values than
/// `k` the distinct values themselves are returned (zero distortion).
/// Centroids start at k evenly spaced empirical quantiles; empty cells are
/// re-seeded by splitting the cell with the largest distortion.
ScalarQuantizer train_lloyd_max(std::span<const float> samples, int k, const TrainOptions& opts = {},
                                TrainReport* report = nullptr);

/// LBG / k-means over the rows of `blocks` (n x d). Initial codewords are k
/// distinct rows drawn with `opts.seed`; for d = 1 the quantile start of
/// train_lloyd_max is used so both routines agree exactly.
VectorQuantizer train_lbg(const RowMatrixXf& blocks, int k, const TrainOptions& opts = {},
                          TrainReport* report = nullptr);

IndexTensor sq_encode(const ScalarQuantizer& q, const Tensor& t);
Tensor sq_decode(const ScalarQuantizer& q, const IndexTensor& it);

/// Flattens `t` row-major into rows of length d, zero-padding the tail.
RowMatrixXf to_blocks(std::span<const float> values, int d);

IndexTensor vq_encode(const VectorQuantizer& q, const Tensor& t);
Tensor vq_decode(const VectorQuantizer& q, const IndexTensor& it);

using AnyQuantizer = std::variant<ScalarQuantizer, VectorQuantizer>;

std::size_t codeword_count(const AnyQuantizer& q);

}  // namespace nncomp
