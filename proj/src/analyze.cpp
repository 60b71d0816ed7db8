#include "nncomp/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>

#include "nncomp/error.hpp"

namespace nncomp {

std::uint64_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

namespace {

double median_of(std::vector<float> v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

LaplacianFit fit_laplacian(std::span<const float> values) {
  if (values.size() < 2) throw DegenerateError("Laplacian fit needs at least two values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) throw DegenerateError("Laplacian fit of a constant tensor");
  LaplacianFit fit;
  fit.mu = median_of(std::vector<float>(values.begin(), values.end()));
  double acc = 0.0;
  for (float x : values) acc += std::fabs(static_cast<double>(x) - fit.mu);
  fit.b = acc / static_cast<double>(values.size());
  return fit;
}

LaplacianFit fit_laplacian(const Tensor& t) { return fit_laplacian(std::span(t.data)); }

std::vector<LayerStats> layer_stats(const Network& net) {
  std::vector<LayerStats> out;
  for (const auto& layer : net.layers) {
    if (layer.kind != LayerKind::Conv) continue;
    const auto* w = layer.find(TensorRole::ConvWeight);
    if (!w || !w->materialized()) continue;
    const auto x = Eigen::Map<const Eigen::VectorXf>(w->data.data(),
                                                     static_cast<Eigen::Index>(w->data.size()))
                       .cast<double>();
    LayerStats s;
    s.name = layer.name;
    s.count = x.size();
    s.mean = x.mean();
    const Eigen::ArrayXd centered = x.array() - s.mean;
    s.variance = centered.square().mean();
    if (s.variance > 0.0) {
      const double m4 = centered.square().square().mean();
      s.excess_kurtosis = m4 / (s.variance * s.variance) - 3.0;
      const auto fit = fit_laplacian(*w);
      s.laplace_mu = fit.mu;
      s.laplace_b = fit.b;
    } else {
      s.laplace_mu = s.mean;
    }
    out.push_back(std::move(s));
  }
  return out;
}

double empirical_entropy(const Histogram& h) {
  const auto total = h.total();
  if (total == 0) throw ArgumentError("entropy of an empty histogram");
  double H = 0.0;
  for (auto c : h.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    H -= p * std::log2(p);
  }
  return std::max(0.0, H);
}

}  // namespace nncomp
