#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "fracsob/extension.hpp"
#include "fracsob/field_map.hpp"
#include "fracsob/mesh.hpp"
#include "fracsob/numerics.hpp"

namespace fracsob {

struct SobolevParams {
  double s = 0.5;
  double p = 2.0;
  int j = -1;  // target skeleton dimension, -1 when unused

  double sp() const { return s * p; }
  /// 0 < s <= 1 and p >= 1.
  void validate() const;
  /// Fractional kernel runs need 0 < s < 1.
  void validate_fractional() const;
  nlohmann::json to_json() const;
  static SobolevParams from_json(const nlohmann::json& j);
};

enum class QuadMethod { MonteCarloPairs, TensorGrid };

struct QuadratureSpec {
  QuadMethod method = QuadMethod::MonteCarloPairs;
  std::uint64_t samples = 200'000;
  double diagonal_cutoff = 0.0;  // delta_0: pairs closer than this are excluded
  std::uint64_t seed = 1;
  bool euclidean_kernel = false;  // sup-norm kernel otherwise
  bool refinement_check = false;  // also run the cutoff-refinement divergence check

  void validate() const;
  nlohmann::json to_json() const;
  static QuadratureSpec from_json(const nlohmann::json& j);
};

struct NormReport {
  std::string op;
  double value = 0.0;
  double std_error = 0.0;
  SobolevParams params;
  QuadratureSpec quad;
  bool divergent = false;
  std::uint64_t skipped = 0;  // quadrature nodes on exceptional sets
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// Mixture of two truncated power laws on [lo, hi] with density proportional to
/// r^(gamma - 1); samples alternate deterministically between the components and
/// weights use the mixture density (balance heuristic).
struct RadialLaw {
  double lo = 0.0;
  double hi = 1.0;
  double gamma[2] = {1.0, 1.0};

  static RadialLaw for_kernel(double s, double p, double lo, double hi);
  double sample(double u, int component) const;
  double density(double r) const;
};

/// Weight for integrating over a region given as a box plus an optional mask.
using RegionMask = std::function<bool(const Vec&)>;

/// (int |f|^p)^(1/p) over the box (restricted to the mask when given).
NormReport lp_norm(const FieldMap& f, const Box& box, double p, const QuadratureSpec& quad,
                   const RegionMask& mask = {});

/// p-th power of the Gagliardo seminorm over the box, kernel exponent n + sp.
NormReport gagliardo_seminorm_p(const FieldMap& f, const Box& box, double s, double p, const QuadratureSpec& quad);

/// ||f - g||_{L^p}^p + |f - g|_{W^{s,p}}^p from shared nodes.
NormReport wsp_distance(const FieldMap& f, const FieldMap& g, const Box& box, double s, double p,
                        const QuadratureSpec& quad);

/// int |grad f|^r (Frobenius norm). Nodes closer than eta to the singular set are
/// dropped; eta is refined geometrically and a non-stabilizing sequence is flagged.
struct W1rOptions {
  std::function<double(const Vec&)> singular_distance;  // empty: no singular set
  double eta0 = 1e-2;
  int refinements = 3;
  CubatureOptions cubature{1e-5, 0.0, 1'000'000};
};
NormReport w1r_seminorm(const FieldMap& f, const Box& box, double r, const QuadratureSpec& quad,
                        const RegionMask& mask = {}, const W1rOptions& opts = {});

/// Faces of one skeleton level with their near-neighbour lists.
class SkeletonIndex {
 public:
  SkeletonIndex(std::shared_ptr<const MeshSpec> mesh, int level, double near_radius);

  const MeshSpec& mesh() const { return *mesh_; }
  int level() const { return level_; }
  const std::vector<Face>& faces() const { return faces_; }
  /// Total j-measure: face count times (2 eps)^j.
  double measure() const;
  const std::vector<std::uint32_t>& near(std::size_t face) const { return near_[face]; }
  std::optional<std::size_t> find(const Face& f) const;

  /// Uniform point of face i from unit uniforms.
  SkeletonPoint point_on_face(std::size_t i, std::span<const double> u) const;
  SkeletonPoint uniform_point(Rng& rng) const;

 private:
  std::shared_ptr<const MeshSpec> mesh_;
  int level_;
  std::vector<Face> faces_;
  std::vector<std::vector<std::uint32_t>> near_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// ||g||_{L^p(C_l)}^p over the level-l faces.
NormReport skeleton_lp(const SkeletonMap& g, int level, double p, const QuadratureSpec& quad);

/// p-th power of the skeleton seminorm: kernel |g(X)-g(Y)|^p / |X-Y|^(l+sp), ambient
/// sup distance. With `within_two_eps` only pairs with |X-Y| < 2 eps count.
NormReport skeleton_gagliardo_p(const SkeletonMap& g, int level, double s, double p, const QuadratureSpec& quad,
                                bool within_two_eps = false, double kernel_exponent = -1.0);

/// int_{C_l} |g(X^l) - g(X^{l-1})|^p / |X^l - X^{l-1}|^{sp}.
NormReport cross_term(const SkeletonMap& g, int level, double s, double p, const QuadratureSpec& quad);

/// ||g1 - g2||^p on C_l (L^p part plus full-range seminorm), shared nodes.
NormReport skeleton_wsp_distance(const SkeletonMap& g1, const SkeletonMap& g2, int level, double s, double p,
                                 const QuadratureSpec& quad);

struct MembershipReport {
  std::vector<NormReport> level_norms;   // level l = 1..j: L^p^p + seminorm^p
  std::vector<NormReport> cross_terms;   // level l = 1..j
  bool member = true;
  nlohmann::json to_json() const;
};
MembershipReport wspj_membership(const SkeletonMap& g, int j, double s, double p, const QuadratureSpec& quad);

/// Estimate at cutoffs delta, delta/4, delta/16; the last increment must shrink.
struct RefinementCheck {
  std::vector<double> cutoffs;
  std::vector<NormReport> reports;
  bool divergent = false;
};
RefinementCheck refine_cutoff(const std::function<NormReport(double)>& estimate, double delta);

/// k(omega, lambda) for eps = 1: integral over the two sector parametrizations
/// of t_1^{n-1}...t_{n-j}^{j} u_1^{n-1}...u_{n-j}^{j} / |X^n - Y^n|^{n+sp}.
/// omega, lambda are points of the j-skeleton of the unit cube lying in their sectors.
CubatureResult kernel_k(const Vec& omega, const Sector& so, const Vec& lambda, const Sector& sl, int j, double s,
                        double p, const CubatureOptions& opts = {});

struct KernelRow {
  Vec omega, lambda;
  double distance = 0.0;  // |omega - lambda|
  double k = 0.0;
  double ratio = 0.0;
  double ratio_refined = 0.0;
  bool converged = true;
};
struct KernelReport {
  int n = 0, j = 0;
  double s = 0.0, p = 0.0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;  // omega == lambda
  double max_ratio = 0.0;
  double max_ratio_refined = 0.0;
  double relative_change = 0.0;
  bool bounded = false;
  std::vector<KernelRow> rows;
  nlohmann::json to_json(bool with_rows = false) const;
};
struct KernelCheckOptions {
  std::size_t pairs = 1000;
  std::uint64_t seed = 1;
  CubatureOptions coarse{1e-3, 0.0, 20'000};
  double stability_tol = 0.05;
  std::size_t equal_every = 100;  // every k-th pair is a deliberate omega == lambda row
};
KernelReport verify_kernel_bound(int n, int j, double s, double p, const KernelCheckOptions& opts = {});

}  // namespace fracsob
