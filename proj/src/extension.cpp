#include "fracsob/extension.hpp"

#include <algorithm>
#include <cmath>

#include "fracsob/errors.hpp"

namespace fracsob {

SkeletonMap restrict_to_skeleton(const FieldMap& f, std::shared_ptr<const MeshSpec> mesh, int j) {
  if (f.in_dim() != mesh->dim) throw PreconditionError("restrict: field and mesh dimensions differ");
  const MeshSpec* m = mesh.get();
  return SkeletonMap(mesh, j, f.out_dim(), [f, m](const SkeletonPoint& pt) { return f(pt.ambient(*m)); });
}

SkeletonPoint skeleton_point_on_face(const Face& face, const MeshSpec& mesh, const Vec& x) {
  const int n = mesh.dim;
  const double eps = mesh.half_width;
  SkeletonPoint pt{CubeIndex(n), Vec(n), 0u, 0};
  for (int i = 0; i < n; ++i) {
    const std::int64_t c = face.code[i];
    if (face.is_free(i)) {
      pt.cube[i] = c / 2;
      const double center = mesh.translation[i] + eps * static_cast<double>(c);
      pt.local[i] = std::clamp(x[i] - center, -eps, eps);
      ++pt.dim;
    } else {
      // The lower of the two adjacent cubes; the face sits at local +eps.
      pt.cube[i] = (c - 1) / 2;
      pt.local[i] = eps;
      pt.pinned |= 1u << i;
    }
  }
  return pt;
}

ProjectionResult project_to_skeleton(const Vec& local, int j, double eps) {
  const int n = local.size();
  ProjectionResult r;
  r.sector = sector_of(local, j);
  r.dim = j;
  r.scale_chain = Vec(n - j);
  for (int i = 0; i < n - j; ++i) r.scale_chain[i] = std::abs(local[r.sector.sigma[i]]);
  const double d = r.scale_chain[n - j - 1];
  if (d == 0.0) throw ExceptionalPoint("projection undefined on the dual skeleton");
  r.target = Vec(n);
  for (int k = 0; k < n - j; ++k) r.pinned |= 1u << r.sector.sigma[k];
  for (int l = 0; l < n; ++l) {
    if ((r.pinned >> l) & 1u) continue;
    r.target[l] = eps * (local[l] / d);
  }
  for (int k = 0; k < n - j; ++k) r.target[r.sector.sigma[k]] = eps * static_cast<double>(r.sector.q[k]);
  return r;
}

SkeletonPoint project_step(const SkeletonPoint& pt, double eps) {
  if (pt.dim < 1) throw PreconditionError("project_step: point already on the 0-skeleton");
  const int n = pt.local.size();
  int axis = -1;
  double a = -1.0;
  for (int i = 0; i < n; ++i) {
    if (pt.is_pinned(i)) continue;
    if (std::abs(pt.local[i]) > a) {
      a = std::abs(pt.local[i]);
      axis = i;
    }
  }
  if (a == 0.0) throw ExceptionalPoint("project_step: point at a face center");
  SkeletonPoint out = pt;
  out.pinned |= 1u << axis;
  out.dim = pt.dim - 1;
  for (int i = 0; i < n; ++i) {
    if (pt.is_pinned(i)) continue;
    out.local[i] = i == axis ? (pt.local[i] < 0.0 ? -eps : eps) : eps * (pt.local[i] / a);
  }
  return out;
}

SkeletonPoint skeleton_projection(const Vec& x, const MeshSpec& mesh, int j) {
  if (j < 0 || j > mesh.dim) throw PreconditionError("skeleton projection: need 0 <= j <= n");
  if (!mesh.bounds.contains(x)) throw OutOfBounds("point outside the mesh bounds");
  const CubeIndex k = cube_of(x, mesh);
  const Vec local = local_coordinates(x, mesh, k);
  if (j == mesh.dim) return {k, local, 0u, j};
  return project_to_skeleton(local, j, mesh.half_width).at_cube(k);
}

Vec eval_extension(const FieldMap& f, const MeshSpec& mesh, int j, const Vec& x) {
  return f(skeleton_projection(x, mesh, j).ambient(mesh));
}

FieldMap homogeneous_extension(const FieldMap& f, const MeshSpec& mesh, int j) {
  return FieldMap(
      f.name() + "_ext", f.in_dim(), f.out_dim(), [f, mesh, j](const Vec& x) { return eval_extension(f, mesh, j, x); },
      [f, mesh, j](const Vec& x) { return extension_gradient(f, mesh, j, x); });
}

FieldMap extend_skeleton_map(const SkeletonMap& g, int j) {
  if (j > g.level()) throw PreconditionError("extend: skeleton map lives on a lower skeleton");
  const MeshSpec& mesh = g.mesh();
  return FieldMap("skeleton_ext", mesh.dim, g.out_dim(), [g, j](const Vec& x) {
    return g(skeleton_projection(x, g.mesh(), j));
  });
}

namespace {

// Smallest distance from `local` to a place where the projection formula changes:
// the dual skeleton, a sector boundary, or the cube boundary.
double formula_gap(const Vec& local, int j, double eps) {
  const int n = local.size();
  std::array<double, kMaxDim> a{};
  for (int i = 0; i < n; ++i) a[i] = std::abs(local[i]);
  std::sort(a.begin(), a.begin() + n, std::greater<>());
  double gap = std::min(eps - a[0], a[n - j - 1]);
  if (n - j < n) gap = std::min(gap, a[n - j - 1] - a[n - j]);
  for (int i = 0; i + 1 < n - j; ++i) gap = std::min(gap, a[i] - a[i + 1]);
  return gap;
}

}  // namespace

Jacobian extension_gradient(const FieldMap& f, const MeshSpec& mesh, int j, const Vec& x) {
  const int n = mesh.dim;
  const double eps = mesh.half_width;
  if (j < 0 || j >= n) throw PreconditionError("extension_gradient: need 0 <= j < n");
  const CubeIndex k = cube_of(x, mesh);
  const Vec local = local_coordinates(x, mesh, k);
  const double dist = dual_skeleton_distance(x, mesh, j);
  if (dist <= 1e-12 * eps) throw SingularPoint("gradient requested on the dual skeleton");
  const ProjectionResult pr = project_to_skeleton(local, j, eps);

  if (f.has_analytic_jacobian()) {
    // D X^j: free coordinates eps y_l / |y_m| with m = sigma(n-j); pinned ones are constant.
    const int m = static_cast<int>(pr.sector.sigma[n - j - 1]);
    const double d = std::abs(local[m]), sm = local[m] < 0.0 ? -1.0 : 1.0;
    Jacobian D(n, n);
    for (int l = 0; l < n; ++l) {
      if ((pr.pinned >> l) & 1u) continue;
      D(l, l) = eps / d;
      D(l, m) = -eps * local[l] * sm / (d * d);
    }
    return f.jacobian(pr.at_cube(k).ambient(mesh)) * D;
  }

  const double h = 1e-4 * std::min(eps, formula_gap(local, j, eps));
  if (!(h > 0.0)) throw SingularPoint("gradient requested on a sector or cube boundary");
  Jacobian J(f.out_dim(), n);
  const Vec center = mesh.cube_center(k);
  for (int c = 0; c < n; ++c) {
    Vec lp = local, lm = local;
    lp[c] += h;
    lm[c] -= h;
    const Vec fp = f(project_to_skeleton(lp, j, eps).target + center);
    const Vec fm = f(project_to_skeleton(lm, j, eps).target + center);
    for (int i = 0; i < f.out_dim(); ++i) J(i, c) = (fp[i] - fm[i]) / (2.0 * h);
  }
  return J;
}

}  // namespace fracsob
