#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fracsob/sobolev.hpp"

namespace fracsob {

struct TSample {
  Vec T;
  double error = 0.0;
  double std_error = 0.0;
};

struct TSelection {
  Vec best;
  double best_error = 0.0;
  double best_std_error = 0.0;
  double mean_error = 0.0;
  double std_dev = 0.0;
  std::vector<TSample> samples;
  nlohmann::json to_json() const;
};

/// `count` translations drawn uniformly in (-eps, eps)^n from the substream keyed by eps.
std::vector<Vec> sample_translations(int n, double eps, std::size_t count, std::uint64_t seed);

/// Error ||f - f_{T,eps}||^p_{W^{s,p}(omega)} for the homogeneous extension of f on
/// the mesh covering omega.
NormReport extension_error(const FieldMap& f, const Box& omega, const Vec& T, double eps, int j, double s, double p,
                           const QuadratureSpec& quad);

/// Translation minimizing the estimated extension error. Every T uses the same
/// quadrature seed, so the comparison is made with common random numbers.
TSelection select_good_T(const FieldMap& f, const Box& omega, double eps, int j, double s, double p,
                         std::size_t count, const QuadratureSpec& quad);
TSelection select_good_T(const FieldMap& f, const Box& omega, double eps, int j, double s, double p,
                         const std::vector<Vec>& candidates, const QuadratureSpec& quad);

/// Trend rule on a schedule of errors: consecutive values nonincreasing within one
/// combined standard error and final < ratio * initial.
std::string trend_verdict(const std::vector<double>& values, const std::vector<double>& std_errors,
                          double ratio = 0.5);
inline constexpr const char* kDecreasing = "decreasing-to-tolerance";
inline constexpr const char* kNonDecreasing = "non-decreasing";
inline constexpr const char* kInconclusive = "inconclusive";

}  // namespace fracsob
