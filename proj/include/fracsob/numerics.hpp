#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <span>
#include <utility>
#include <vector>

namespace fracsob {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gauss_legendre(int order);

/// Sum with pairwise reduction; order-deterministic.
double pairwise_sum(std::span<const double> xs);

/// Running first and second moments of a weighted sample.
struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::uint64_t count = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  /// Standard error of the mean.
  double std_error() const;
};

/// Samples per deterministic chunk of a Monte Carlo run. Fixed so results never
/// depend on the number of worker threads.
inline constexpr std::uint64_t kChunkSize = 4096;

/// Merges per-chunk moments in index order with pairwise sums.
Moments reduce_moments(std::span<const Moments> parts);

/// Number of worker threads used by chunked estimators. Results never depend on it.
int worker_threads();
void set_worker_threads(int n);

/// Runs body(chunk) for chunk in [0, chunks) over the worker pool and returns
/// the results in chunk order.
template <typename R>
std::vector<R> run_chunks(std::size_t chunks, const std::function<R(std::size_t)>& body);

class Rng;

struct McResult {
  Moments moments;
  std::uint64_t skipped = 0;  // nodes that hit an exceptional point (weight 0)
};

/// Monte Carlo driver. body(rng, i) returns the weight of global sample i, or NaN
/// for a node that must be skipped. Chunk c draws from substream (seed, tag, c).
McResult monte_carlo(std::uint64_t samples, std::uint64_t seed, std::string_view tag,
                     const std::function<double(Rng&, std::uint64_t)>& body);

struct CubatureOptions {
  double rel_tol = 1e-6;
  double abs_tol = 0.0;
  std::size_t max_evals = 2'000'000;
};

struct CubatureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evals = 0;
  bool converged = false;
};

using ScalarIntegrand = std::function<double(std::span<const double>)>;

/// h-adaptive cubature over an axis-aligned box: Gauss-Kronrod (7,15) in one
/// dimension, the Genz-Malik degree-7/5 embedded rule in two or more. Regions
/// with the largest error estimate are bisected until the tolerance or the
/// evaluation budget is reached.
CubatureResult adaptive_cubature(const ScalarIntegrand& f, std::span<const double> lo,
                                 std::span<const double> hi, const CubatureOptions& opts = {});

}  // namespace fracsob

#include "fracsob/numerics_impl.hpp"
