#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nncomp/network.hpp"

namespace nncomp {

/// Laplace(mu, b) maximum-likelihood fit.
struct LaplacianFit {
  double mu = 0.0;
  double b = 1.0;
};

struct Histogram {
  std::vector<std::uint64_t> counts;

  Histogram() = default;
  explicit Histogram(std::size_t symbols) : counts(symbols, 0) {}
  Histogram(std::initializer_list<std::uint64_t> c) : counts(c) {}

  std::size_t symbol_count() const { return counts.size(); }
  std::uint64_t total() const;

  template <typename Index>
  static Histogram of(std::span<const Index> indices, std::size_t symbols) {
    Histogram h(symbols);
    for (auto i : indices) ++h.counts[static_cast<std::size_t>(i)];
    return h;
  }
};

/// Median (mean of the central pair for even length) and mean absolute
/// deviation about it. Throws DegenerateError for fewer than two values or a
/// constant input.
LaplacianFit fit_laplacian(std::span<const float> values);
LaplacianFit fit_laplacian(const Tensor& t);

struct LayerStats {
  std::string name;
  std::int64_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // population
  double laplace_mu = 0.0;
  double laplace_b = 0.0;
  double excess_kurtosis = 0.0;
};

/// One record per conv layer with a materialized weight, in network order.
/// Layers whose weights are constant report b = 0 and kurtosis 0.
std::vector<LayerStats> layer_stats(const Network& net);

/// Shannon entropy in bits per symbol over the nonzero bins. Throws
/// ArgumentError for an empty histogram.
double empirical_entropy(const Histogram& h);

}  // namespace nncomp
