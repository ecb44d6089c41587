#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "fracsob/vec.hpp"

namespace fracsob {

/// Integer cube index K; the cube is T + 2 eps K + (-eps, eps)^n.
using CubeIndex = IVec;

/// The horizontal cubical mesh of size 2 eps having T as one of its centers,
/// clipped to a finite box.
struct MeshSpec {
  Vec translation;  // T
  double half_width = 0.0;  // eps
  int dim = 0;
  Box bounds;

  void validate() const;
  Vec cube_center(const CubeIndex& k) const;

  /// The mesh whose bounds are the union of the cubes meeting `region` in a set of
  /// positive measure.
  static MeshSpec covering(const Vec& translation, double half_width, const Box& region);

  nlohmann::json to_json() const;
  static MeshSpec from_json(const nlohmann::json& j);
};

/// Sign pattern q and ordering sigma (0-based axes) of a sector Q_{eps,q,sigma}.
struct Sector {
  IVec q;
  IVec sigma;
  bool operator==(const Sector&) const = default;
};

/// A face of the mesh, keyed by the integer vector c with center T + eps c.
/// Even entries are free axes, odd entries are pinned axes.
struct Face {
  IVec code;

  int dim() const;
  bool is_free(int axis) const { return code[axis] % 2 == 0; }
  Vec center(const MeshSpec& mesh) const;
  bool operator==(const Face&) const = default;
  bool operator<(const Face& o) const;
};

/// A point of the j-skeleton, stored in the coordinates of one cube that
/// contains it: pinned axes carry |local| = eps exactly.
struct SkeletonPoint {
  CubeIndex cube;
  Vec local;
  std::uint32_t pinned = 0;  // bitmask of pinned axes
  int dim = 0;               // j

  bool is_pinned(int axis) const { return (pinned >> axis) & 1u; }
  Vec ambient(const MeshSpec& mesh) const;
  Face face() const;
};

/// The cube containing X; points on cube boundaries go to the smallest candidate index.
CubeIndex cube_of(const Vec& x, const MeshSpec& mesh);
/// X - T - 2 eps K for K = cube_of(X).
Vec local_coordinates(const Vec& x, const MeshSpec& mesh, const CubeIndex& k);

/// Sector of `local` for target dimension j: the n-j axes of largest |coordinate|,
/// in decreasing order, ties to the smaller axis; sign(0) = +1.
Sector sector_of(const Vec& local, int j);

/// All j-faces whose closure meets the bounds in a set of positive j-measure,
/// in deterministic order.
std::vector<Face> enumerate_skeleton_faces(const MeshSpec& mesh, int j);

/// Sup-norm distance from X to the dual skeleton of the j-skeleton, i.e. the
/// (n-j-1)-skeleton of the mesh translated by (eps, ..., eps).
double dual_skeleton_distance(const Vec& x, const MeshSpec& mesh, int j);

/// Sup-norm distance from a point of a face to the face's relative boundary,
/// measured in the face's free axes (eps for the face center).
double face_boundary_distance(const Face& face, const MeshSpec& mesh, const Vec& x);

}  // namespace fracsob
