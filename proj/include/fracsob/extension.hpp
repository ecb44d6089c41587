#pragma once

#include <functional>
#include <memory>
#include <string>

#include "fracsob/field_map.hpp"
#include "fracsob/mesh.hpp"

namespace fracsob {

/// A map defined on the j-skeleton of a mesh (and on every lower skeleton,
/// which it contains). Evaluated at skeleton points.
class SkeletonMap {
 public:
  using Fn = std::function<Vec(const SkeletonPoint&)>;

  SkeletonMap() = default;
  SkeletonMap(std::shared_ptr<const MeshSpec> mesh, int level, int out_dim, Fn fn)
      : mesh_(std::move(mesh)), level_(level), out_dim_(out_dim), fn_(std::move(fn)) {}

  Vec operator()(const SkeletonPoint& pt) const { return fn_(pt); }
  const MeshSpec& mesh() const { return *mesh_; }
  std::shared_ptr<const MeshSpec> mesh_ptr() const { return mesh_; }
  int level() const { return level_; }
  int out_dim() const { return out_dim_; }

 private:
  std::shared_ptr<const MeshSpec> mesh_;
  int level_ = 0;
  int out_dim_ = 0;
  Fn fn_;
};

/// f restricted to the j-skeleton of the mesh.
SkeletonMap restrict_to_skeleton(const FieldMap& f, std::shared_ptr<const MeshSpec> mesh, int j);

/// Skeleton point at ambient position x on the given face (x must lie on the face closure).
SkeletonPoint skeleton_point_on_face(const Face& face, const MeshSpec& mesh, const Vec& x);

struct ProjectionResult {
  Vec target;                 // local coordinates of X^j
  std::uint32_t pinned = 0;   // axes pinned to +-eps
  Sector sector;
  Vec scale_chain;            // |local_sigma(1)|, ..., |local_sigma(n-j)|
  int dim = 0;

  SkeletonPoint at_cube(const CubeIndex& k) const { return {k, target, pinned, dim}; }
};

/// Radial projection of a point of the closed cube Q_eps onto its j-skeleton.
/// Throws ExceptionalPoint when the (n-j)-th largest |coordinate| vanishes.
ProjectionResult project_to_skeleton(const Vec& local, int j, double eps);

/// One radial projection step from level l to level l-1, centered at the
/// center of the face carrying the point.
SkeletonPoint project_step(const SkeletonPoint& pt, double eps);

/// Projection of an ambient point onto the j-skeleton: (cube, X^j).
SkeletonPoint skeleton_projection(const Vec& x, const MeshSpec& mesh, int j);

/// f_{T,eps}(X) = f(U + X^j) with U the center of the cube containing X.
Vec eval_extension(const FieldMap& f, const MeshSpec& mesh, int j, const Vec& x);

/// The piecewise j-homogeneous extension of f as a field map on the mesh bounds.
FieldMap homogeneous_extension(const FieldMap& f, const MeshSpec& mesh, int j);

/// Extension of a skeleton map: h(X) = g(U + X^j).
FieldMap extend_skeleton_map(const SkeletonMap& g, int j);

/// Jacobian of the extension at X: chain rule through the projection when f has
/// an analytic Jacobian, central differences otherwise.
Jacobian extension_gradient(const FieldMap& f, const MeshSpec& mesh, int j, const Vec& x);

}  // namespace fracsob
