#include "nncomp/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "nncomp/error.hpp"
#include "nncomp/random.hpp"

namespace nncomp {

namespace {

double sqdist(const float* a, const float* b, int d) {
  double acc = 0.0;
  for (int t = 0; t < d; ++t) {
    const double diff = static_cast<double>(a[t]) - static_cast<double>(b[t]);
    acc += diff * diff;
  }
  return acc;
}

// Nearest centroid in an ascending array, ties toward the lower index. The
// squared distance is unimodal over sorted centroids, so the minimum lies at
// the bracketing pair and any tied minimizers sit contiguously to its left.
std::uint32_t nearest_sorted(const float* c, std::size_t k, float x) {
  std::size_t i = static_cast<std::size_t>(std::lower_bound(c, c + k, x) - c);
  std::size_t best;
  if (i == k) {
    best = k - 1;
  } else if (i == 0) {
    best = 0;
  } else {
    best = sqdist(&x, c + i - 1, 1) <= sqdist(&x, c + i, 1) ? i - 1 : i;
  }
  const double d = sqdist(&x, c + best, 1);
  while (best > 0 && sqdist(&x, c + best - 1, 1) == d) --best;
  return static_cast<std::uint32_t>(best);
}

std::uint32_t nearest_brute(const float* cb, std::size_t k, int d, const float* x) {
  std::uint32_t best = 0;
  double best_d = sqdist(x, cb, d);
  for (std::size_t j = 1; j < k; ++j) {
    const double dj = sqdist(x, cb + j * static_cast<std::size_t>(d), d);
    if (dj < best_d) {
      best_d = dj;
      best = static_cast<std::uint32_t>(j);
    }
  }
  return best;
}

bool row_less(const float* a, const float* b, int d) {
  return std::lexicographical_compare(a, a + d, b, b + d);
}

// Sorts the k rows of a row-major k x d array lexicographically.
void sort_rows(std::vector<float>& cb, int d) {
  const std::size_t k = cb.size() / static_cast<std::size_t>(d);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return row_less(cb.data() + a * d, cb.data() + b * d, d);
  });
  std::vector<float> out;
  out.reserve(cb.size());
  for (auto r : order) out.insert(out.end(), cb.begin() + r * d, cb.begin() + (r + 1) * d);
  cb = std::move(out);
}

void unique_rows(std::vector<float>& cb, int d) {
  std::vector<float> out;
  const std::size_t k = cb.size() / static_cast<std::size_t>(d);
  for (std::size_t r = 0; r < k; ++r) {
    const float* row = cb.data() + r * d;
    if (!out.empty() && std::equal(row, row + d, out.end() - d)) continue;
    out.insert(out.end(), row, row + d);
  }
  cb = std::move(out);
}

// Sorted distinct rows of the n x d sample array.
std::vector<float> distinct_rows(const float* x, std::size_t n, int d) {
  std::vector<float> rows(x, x + n * static_cast<std::size_t>(d));
  sort_rows(rows, d);
  unique_rows(rows, d);
  return rows;
}

std::vector<float> quantile_init(const float* x, std::size_t n, int k) {
  std::vector<float> sorted(x, x + n);
  std::sort(sorted.begin(), sorted.end());
  std::vector<float> c(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const std::size_t pos = (2 * static_cast<std::size_t>(i) + 1) * n / (2 * static_cast<std::size_t>(k));
    c[static_cast<std::size_t>(i)] = sorted[std::min(pos, n - 1)];
  }
  return c;
}

std::vector<float> random_row_init(const float* x, std::size_t n, int d, int k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::set<std::vector<float>> chosen;
  std::vector<float> cb;
  for (std::size_t pos = 0; pos < n && chosen.size() < static_cast<std::size_t>(k); ++pos) {
    std::swap(perm[pos], perm[pos + rng.below(n - pos)]);
    const float* row = x + perm[pos] * d;
    if (chosen.insert(std::vector<float>(row, row + d)).second) cb.insert(cb.end(), row, row + d);
  }
  sort_rows(cb, d);
  return cb;
}

// Alternating assignment / centroid update over n points of dimension d.
// `nearest(cb, point)` must implement the lowest-index nearest rule.
template <typename Nearest>
std::vector<float> lloyd_iterate(const float* x, std::size_t n, int d, std::vector<float> cb,
                                 const TrainOptions& opts, TrainReport& report, Nearest nearest) {
  const std::size_t k = cb.size() / static_cast<std::size_t>(d);
  const auto du = static_cast<std::size_t>(d);
  std::vector<std::uint32_t> assign(n);
  std::vector<double> sums(k * du);
  std::vector<double> sse(k * du);
  std::vector<std::size_t> counts(k);
  double prev = std::numeric_limits<double>::infinity();

  for (int iter = 0;; ++iter) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* p = x + i * du;
      const auto a = nearest(cb, p);
      assign[i] = a;
      total += sqdist(p, cb.data() + a * du, d);
    }
    const double distortion = total / static_cast<double>(n);
    report.distortion.push_back(distortion);
    if (distortion == 0.0 || (iter > 0 && prev - distortion <= opts.tol * prev)) {
      report.converged = true;
      break;
    }
    if (iter + 1 >= opts.max_iter) break;
    prev = distortion;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = assign[i];
      ++counts[a];
      for (std::size_t t = 0; t < du; ++t) sums[a * du + t] += x[i * du + t];
    }
    bool any_empty = false;
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) {
        any_empty = true;
        continue;
      }
      for (std::size_t t = 0; t < du; ++t)
        cb[j * du + t] = static_cast<float>(sums[j * du + t] / static_cast<double>(counts[j]));
    }

    if (any_empty) {
      // Re-seed each empty cell next to the cell with the largest distortion.
      std::fill(sse.begin(), sse.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto a = assign[i];
        for (std::size_t t = 0; t < du; ++t) {
          const double diff = static_cast<double>(x[i * du + t]) - cb[a * du + t];
          sse[a * du + t] += diff * diff;
        }
      }
      std::vector<double> cell(k, -1.0);
      for (std::size_t j = 0; j < k; ++j)
        if (counts[j] > 0) cell[j] = std::accumulate(sse.begin() + j * du, sse.begin() + (j + 1) * du, 0.0);
      std::vector<int> splits(k, 0);
      for (std::size_t e = 0; e < k; ++e) {
        if (counts[e] != 0) continue;
        const auto src = static_cast<std::size_t>(std::max_element(cell.begin(), cell.end()) - cell.begin());
        if (cell[src] <= 0.0) break;
        for (std::size_t t = 0; t < du; ++t) {
          const float c = cb[src * du + t];
          const double delta = 1e-3 * (1 + splits[src]) *
                               std::sqrt(sse[src * du + t] / static_cast<double>(counts[src]));
          float v = static_cast<float>(c + delta);
          if (delta > 0.0 && v <= c) v = std::nextafter(c, std::numeric_limits<float>::infinity());
          cb[e * du + t] = v;
        }
        cell[src] *= 0.5;
        ++splits[src];
      }
    }
    sort_rows(cb, d);
  }
  return cb;
}

}  // namespace

ScalarQuantizer::ScalarQuantizer(Eigen::VectorXf centroids) : centroids_(std::move(centroids)) {
  if (centroids_.size() < 1) throw ArgumentError("scalar quantizer needs at least one centroid");
  for (Eigen::Index i = 0; i < centroids_.size(); ++i) {
    if (!std::isfinite(centroids_[i])) throw ArgumentError("non-finite centroid");
    if (i > 0 && !(centroids_[i - 1] < centroids_[i]))
      throw ArgumentError("scalar quantizer centroids must be strictly increasing");
  }
}

std::uint32_t ScalarQuantizer::nearest(float x) const {
  return nearest_sorted(centroids_.data(), size(), x);
}

Eigen::VectorXd ScalarQuantizer::boundaries() const {
  const auto k = centroids_.size();
  Eigen::VectorXd b(std::max<Eigen::Index>(k - 1, 0));
  for (Eigen::Index i = 0; i + 1 < k; ++i)
    b[i] = 0.5 * (static_cast<double>(centroids_[i]) + static_cast<double>(centroids_[i + 1]));
  return b;
}

VectorQuantizer::VectorQuantizer(RowMatrixXf codebook) : codebook_(std::move(codebook)) {
  if (codebook_.rows() < 1 || codebook_.cols() < 1)
    throw ArgumentError("vector quantizer needs k >= 1 codewords of dimension d >= 1");
  if (!codebook_.allFinite()) throw ArgumentError("non-finite codeword");
}

std::uint32_t VectorQuantizer::nearest(const float* block) const {
  return nearest_brute(codebook_.data(), size(), dim(), block);
}

ScalarQuantizer train_lloyd_max(std::span<const float> samples, int k, const TrainOptions& opts,
                                TrainReport* report) {
  if (k <= 0) throw ArgumentError("codeword count must be positive");
  if (samples.empty()) throw ArgumentError("cannot train a quantizer on no samples");
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = {};
  const float* x = samples.data();
  const std::size_t n = samples.size();

  auto distinct = distinct_rows(x, n, 1);
  std::vector<float> cb;
  if (distinct.size() <= static_cast<std::size_t>(k)) {
    cb = std::move(distinct);
    rep.distortion.push_back(0.0);
    rep.converged = true;
  } else {
    cb = lloyd_iterate(x, n, 1, quantile_init(x, n, k), opts, rep,
                       [](const std::vector<float>& c, const float* p) {
                         return nearest_sorted(c.data(), c.size(), *p);
                       });
    unique_rows(cb, 1);
  }
  return ScalarQuantizer(Eigen::Map<const Eigen::VectorXf>(cb.data(), static_cast<Eigen::Index>(cb.size())));
}

VectorQuantizer train_lbg(const RowMatrixXf& blocks, int k, const TrainOptions& opts,
                          TrainReport* report) {
  const int d = static_cast<int>(blocks.cols());
  if (d <= 0) throw ArgumentError("block dimension must be positive");
  if (k <= 0) throw ArgumentError("codeword count must be positive");
  if (blocks.rows() == 0) throw ArgumentError("cannot train a quantizer on no samples");
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = {};
  const float* x = blocks.data();
  const auto n = static_cast<std::size_t>(blocks.rows());

  auto distinct = distinct_rows(x, n, d);
  std::vector<float> cb;
  if (distinct.size() / static_cast<std::size_t>(d) <= static_cast<std::size_t>(k)) {
    cb = std::move(distinct);
    rep.distortion.push_back(0.0);
    rep.converged = true;
  } else {
    auto init = d == 1 ? quantile_init(x, n, k) : random_row_init(x, n, d, k, opts.seed);
    cb = lloyd_iterate(x, n, d, std::move(init), opts, rep,
                       [d](const std::vector<float>& c, const float* p) {
                         return nearest_brute(c.data(), c.size() / static_cast<std::size_t>(d), d, p);
                       });
    unique_rows(cb, d);
  }
  const auto rows = static_cast<Eigen::Index>(cb.size() / static_cast<std::size_t>(d));
  return VectorQuantizer(Eigen::Map<const RowMatrixXf>(cb.data(), rows, d));
}

IndexTensor sq_encode(const ScalarQuantizer& q, const Tensor& t) {
  IndexTensor it;
  it.shape = t.shape;
  it.indices.resize(t.data.size());
  for (std::size_t i = 0; i < t.data.size(); ++i) it.indices[i] = q.nearest(t.data[i]);
  return it;
}

Tensor sq_decode(const ScalarQuantizer& q, const IndexTensor& it) {
  if (it.block_dim != 1 || it.pad_count != 0)
    throw CorruptionError("scalar index tensor with block layout");
  if (static_cast<std::int64_t>(it.indices.size()) != numel(it.shape))
    throw CorruptionError("index count does not match tensor shape");
  std::vector<float> data(it.indices.size());
  const auto k = q.size();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (it.indices[i] >= k)
      throw CorruptionError("index " + std::to_string(it.indices[i]) + " out of range for " +
                            std::to_string(k) + " centroids");
    data[i] = q.centroids()[it.indices[i]];
  }
  return Tensor(it.shape, std::move(data));
}

RowMatrixXf to_blocks(std::span<const float> values, int d) {
  if (d <= 0) throw ArgumentError("block dimension must be positive");
  const auto du = static_cast<std::size_t>(d);
  const std::size_t rows = (values.size() + du - 1) / du;
  RowMatrixXf blocks = RowMatrixXf::Zero(static_cast<Eigen::Index>(rows), d);
  std::copy(values.begin(), values.end(), blocks.data());
  return blocks;
}

IndexTensor vq_encode(const VectorQuantizer& q, const Tensor& t) {
  const int d = q.dim();
  const auto blocks = to_blocks(t.data, d);
  IndexTensor it;
  it.shape = t.shape;
  it.block_dim = d;
  it.pad_count = static_cast<int>(blocks.size() - static_cast<Eigen::Index>(t.data.size()));
  it.indices.resize(static_cast<std::size_t>(blocks.rows()));
  for (Eigen::Index r = 0; r < blocks.rows(); ++r)
    it.indices[static_cast<std::size_t>(r)] = q.nearest(blocks.data() + r * d);
  return it;
}

Tensor vq_decode(const VectorQuantizer& q, const IndexTensor& it) {
  const int d = q.dim();
  if (it.block_dim != d) throw CorruptionError("index tensor block size does not match codebook");
  if (it.pad_count < 0 || it.pad_count >= d)
    throw CorruptionError("pad count " + std::to_string(it.pad_count) + " invalid for block size " +
                          std::to_string(d));
  const auto n = numel(it.shape);
  if (static_cast<std::int64_t>(it.indices.size()) * d - it.pad_count != n)
    throw CorruptionError("block count does not match tensor shape");
  std::vector<float> data(it.indices.size() * static_cast<std::size_t>(d));
  const auto k = q.size();
  for (std::size_t b = 0; b < it.indices.size(); ++b) {
    if (it.indices[b] >= k)
      throw CorruptionError("index " + std::to_string(it.indices[b]) + " out of range for " +
                            std::to_string(k) + " codewords");
    const float* row = q.codebook().data() + static_cast<std::size_t>(it.indices[b]) * d;
    std::copy(row, row + d, data.begin() + static_cast<std::ptrdiff_t>(b * d));
  }
  data.resize(static_cast<std::size_t>(n));
  return Tensor(it.shape, std::move(data));
}

std::size_t codeword_count(const AnyQuantizer& q) {
  return std::visit([](const auto& v) { return v.size(); }, q);
}

}  // namespace nncomp
