#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fracsob/field_map.hpp"

namespace fracsob {

/// Target manifold N in R^m with its closed delta-tube M.
class ManifoldTarget {
 public:
  enum class Kind { Sphere, Product, Custom };
  using DistanceFn = std::function<double(const Vec&)>;
  using ProjectFn = std::function<Vec(const Vec&)>;

  /// Unit sphere S^k in R^{k+1}.
  static ManifoldTarget sphere(int k, double delta = 0.2);
  /// S^{k_1} x ... x S^{k_r} in R^{sum (k_i+1)}; distance is Euclidean in the product.
  static ManifoldTarget product(std::vector<int> ks, double delta = 0.2);
  /// Caller-supplied unsigned distance and nearest-point projection.
  static ManifoldTarget custom(int ambient_dim, DistanceFn distance, ProjectFn project, double delta);
  /// {"kind":"sphere","k":1,"delta":0.2} or {"kind":"product","factors":[1,1],"delta":0.2}.
  static ManifoldTarget from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  Kind kind() const { return kind_; }
  int ambient_dim() const { return m_; }
  double delta() const { return delta_; }

  double distance(const Vec& x) const;
  /// Closest point of N, without the tube check.
  Vec project_unchecked(const Vec& x) const;

 private:
  Kind kind_ = Kind::Sphere;
  int m_ = 0;
  double delta_ = 0.2;
  std::vector<int> factors_;
  DistanceFn distance_;
  ProjectFn project_;
};

/// Pi(x); OutsideTube when dist(x, N) > delta.
Vec nearest_point_projection(const Vec& x, const ManifoldTarget& target);
bool in_tube(const Vec& x, const ManifoldTarget& target);

struct TubeCheck {
  bool passed = true;
  double max_distance = 0.0;
  std::size_t samples = 0;
  std::size_t skipped = 0;  // exceptional points of u
};
/// Uniform samples of the box, or an explicit list of points when given.
TubeCheck uniform_tube_check(const FieldMap& u, const ManifoldTarget& target, const Box& region,
                             std::size_t samples, std::uint64_t seed = 0);
TubeCheck uniform_tube_check(const std::function<Vec(std::size_t)>& values, std::size_t count,
                             const ManifoldTarget& target);

/// x -> (x_1, ..., x_{k+1}) / |(x_1, ..., x_{k+1})|_2 with values in S^k.
FieldMap vortex_map(int n, int k);

/// Degree of an S^1-valued map around the circle of the x_1 x_2 plane through
/// `center`, from principal phase increments at `samples` equispaced points.
/// Undersampled if an increment reaches pi or if rounding is ambiguous.
int winding_number(const FieldMap& u, const Vec& center, double radius, int samples);

/// Total phase change divided by 2 pi, before rounding; also the largest increment.
struct WindingDetail {
  double turns = 0.0;
  double max_increment = 0.0;
};
WindingDetail winding_detail(const FieldMap& u, const Vec& center, double radius, int samples);

}  // namespace fracsob
