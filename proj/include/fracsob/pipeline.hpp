#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fracsob/extension.hpp"
#include "fracsob/manifold.hpp"
#include "fracsob/selection.hpp"
#include "fracsob/sobolev.hpp"

namespace fracsob {

/// eta = 1 on [0, plateau_inner], 0 on [support_outer, 1), C^1 smoothstep between.
struct CutoffProfile {
  double plateau_inner = 0.75;
  double support_outer = 0.8;

  static CutoffProfile for_mu(double mu) { return {1.0 - mu / 2.0, 1.0 - mu / 3.0}; }
  void validate() const;
  double operator()(double r) const;
};

/// Tensor bump rho(x) = prod c exp(-1/(1-x_i^2)) on (-1,1)^j, applied through a
/// Gauss-Legendre rule whose weights are renormalized to sum to one.
struct MollifierSpec {
  double t = 0.05;
  int nodes = 16;

  MollifierSpec() = default;
  MollifierSpec(double t_, int nodes_ = 16);
  void validate() const;

  /// Normalized one-dimensional bump density.
  static double bump(double x);
  const std::vector<double>& rule_nodes() const { return z_; }
  const std::vector<double>& rule_weights() const { return w_; }

 private:
  std::vector<double> z_, w_;
};

/// Face-normalized sup radius |X - 0_F| / eps over the free axes of the face carrying pt.
double face_radius(const SkeletonPoint& pt, double eps);

/// Hole filling: on each top-level face, g(X^{j-1}) on the collar r >= 1 - mu and
/// g(0_F + (X - 0_F)/(1 - mu)) inside. Lower-level points pass through.
SkeletonMap fill_hole(const SkeletonMap& g, double mu);

/// (g * rho_t)(X) over the face carrying X; WindowEscapes unless r + t < 1.
Vec mollify_on_cube(const SkeletonMap& g, const MollifierSpec& spec, const SkeletonPoint& pt);

/// G = eta(r) (g * rho_t) + (1 - eta(r)) F(X^{j-1}) on top-level faces, F on lower ones.
SkeletonMap blend_lipschitz(const SkeletonMap& g, const SkeletonMap& F, const MollifierSpec& spec,
                            const CutoffProfile& profile);

/// Pi o G; OutsideTube when a value leaves the tube.
SkeletonMap project_map(const SkeletonMap& G, const ManifoldTarget& target);

struct Schedule {
  std::vector<double> mu;
  std::vector<double> t;

  /// mu_k = 2^{-k-1} for k = 1..stages, t_k = mu_k / 4.
  static Schedule defaults(int stages = 3);
  void validate() const;
  nlohmann::json to_json() const;
  static Schedule from_json(const nlohmann::json& j);
};

struct LipschitzEstimate {
  double constant = 0.0;       // max ratio over all pairs
  double constant_half = 0.0;  // max ratio over the first half of the pairs
  std::size_t pairs = 0;
  std::size_t skipped = 0;
  nlohmann::json to_json() const;
};
/// Empirical Lipschitz constant of g on the level-l skeleton from random pairs,
/// half of them at short range on a common or neighbouring face.
LipschitzEstimate lipschitz_estimate(const SkeletonMap& g, int level, std::size_t pairs, std::uint64_t seed);

struct StageRecord {
  int stage = 0;
  double mu = 0.0;
  double t = 0.0;
  int retries = 0;
  TubeCheck tube;
  LipschitzEstimate lipschitz;
  NormReport error;  // ||g^k - g||^p on the top skeleton
  nlohmann::json to_json() const;
};

struct ApproximationOptions {
  QuadratureSpec quad;             // error norms
  std::size_t tube_samples = 4000;  // per level
  std::size_t lipschitz_pairs = 10'000;
  int max_retries = 3;              // halvings of t after a tube escape
  bool require_membership = false;
  QuadratureSpec membership_quad;
  bool compute_errors = true;
  /// When positive, stages continue past the schedule (mu halved, t = mu/4) until
  /// the skeleton error drops below this value or max_stages is reached.
  double stop_error = -1.0;
  int max_stages = 8;
};

struct ApproximationResult {
  std::vector<SkeletonMap> maps;
  std::vector<StageRecord> stages;
  std::optional<MembershipReport> membership;
  nlohmann::json to_json() const;
};

/// Lipschitz N-valued approximations of an N-valued skeleton map, one per schedule stage.
ApproximationResult lipschitz_approximate(const SkeletonMap& g, const ManifoldTarget& target, double s, double p,
                                          const Schedule& schedule, const ApproximationOptions& opts = {});

struct PipelineOptions {
  double s = 0.6;
  double p = 2.0;
  Box omega;
  std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
  std::size_t t_count = 32;
  QuadratureSpec quad;         // final W^{s,p} errors on omega
  QuadratureSpec select_quad;  // translation selection
  Schedule schedule = Schedule::defaults();
  ApproximationOptions approx;
  bool check_membership = true;
  std::optional<std::pair<Vec, double>> degree_circle;  // center, radius
  int degree_samples = 1024;
  double verdict_ratio = 0.5;
  /// Stages stop once ||g^k - g||^p on the skeleton is below this fraction of the
  /// plain extension error; non-positive keeps the fixed schedule.
  double stage_tolerance = 0.02;
};

struct PipelineLevel {
  double eps = 0.0;
  TSelection selection;
  MeshSpec mesh;
  std::optional<MembershipReport> membership;
  ApproximationResult approx;
  NormReport error;
  LipschitzEstimate lipschitz;
  nlohmann::json degree;
  nlohmann::json to_json() const;
};

struct PipelineReport {
  std::vector<PipelineLevel> levels;
  std::string verdict;
  int j = 0;
  nlohmann::json to_json() const;
};

/// For each eps: pick T, restrict f to the j-skeleton (j = floor(sp)), check the
/// skeleton class, approximate by Lipschitz N-valued maps, extend, and measure the
/// W^{s,p}(omega) error.
PipelineReport thme_pipeline(const FieldMap& f, const ManifoldTarget& target, const PipelineOptions& opts);

}  // namespace fracsob
