#include "fracsob/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "fracsob/errors.hpp"

namespace fracsob {

namespace {

double tolerance(const MeshSpec& mesh) { return 1e-12 * mesh.half_width; }

}  // namespace

void MeshSpec::validate() const {
  if (!(half_width > 0.0)) throw ConfigError("mesh: eps must be positive");
  if (dim < 1 || dim > kMaxDim) throw ConfigError("mesh: dimension out of range");
  if (translation.size() != dim) throw ConfigError("mesh: translation has wrong dimension");
  if (bounds.dim() != dim || !bounds.valid()) throw ConfigError("mesh: degenerate bounds");
}

Vec MeshSpec::cube_center(const CubeIndex& k) const {
  Vec c(dim);
  for (int i = 0; i < dim; ++i) c[i] = translation[i] + 2.0 * half_width * static_cast<double>(k[i]);
  return c;
}

MeshSpec MeshSpec::covering(const Vec& translation, double half_width, const Box& region) {
  MeshSpec m{translation, half_width, translation.size(), region};
  m.validate();
  const double eps = half_width, tol = tolerance(m);
  Box b{Vec(m.dim), Vec(m.dim)};
  for (int i = 0; i < m.dim; ++i) {
    const double t = translation[i];
    const auto kmin = static_cast<std::int64_t>(std::floor((region.lo[i] + tol - t - eps) / (2.0 * eps))) + 1;
    const auto kmax = static_cast<std::int64_t>(std::ceil((region.hi[i] - tol - t + eps) / (2.0 * eps))) - 1;
    b.lo[i] = t + 2.0 * eps * static_cast<double>(kmin) - eps;
    b.hi[i] = t + 2.0 * eps * static_cast<double>(kmax) + eps;
  }
  m.bounds = b;
  return m;
}

nlohmann::json MeshSpec::to_json() const {
  nlohmann::json b = nlohmann::json::array();
  for (int i = 0; i < dim; ++i) b.push_back({bounds.lo[i], bounds.hi[i]});
  return {{"T", translation.to_vector()}, {"eps", half_width}, {"n", dim}, {"bounds", b}};
}

MeshSpec MeshSpec::from_json(const nlohmann::json& j) {
  MeshSpec m;
  const auto t = j.at("T").get<std::vector<double>>();
  m.translation = Vec(std::span<const double>(t));
  m.half_width = j.at("eps").get<double>();
  m.dim = j.at("n").get<int>();
  const auto& b = j.at("bounds");
  if (!b.is_array() || static_cast<int>(b.size()) != m.dim) throw ConfigError("mesh: bounds must have n rows");
  m.bounds = Box{Vec(m.dim), Vec(m.dim)};
  for (int i = 0; i < m.dim; ++i) {
    m.bounds.lo[i] = b[i].at(0).get<double>();
    m.bounds.hi[i] = b[i].at(1).get<double>();
  }
  m.validate();
  return m;
}

int Face::dim() const {
  int d = 0;
  for (auto c : code) d += (c % 2 == 0);
  return d;
}

Vec Face::center(const MeshSpec& mesh) const {
  Vec c(mesh.dim);
  for (int i = 0; i < mesh.dim; ++i) c[i] = mesh.translation[i] + mesh.half_width * static_cast<double>(code[i]);
  return c;
}

bool Face::operator<(const Face& o) const {
  return std::lexicographical_compare(code.begin(), code.end(), o.code.begin(), o.code.end());
}

Vec SkeletonPoint::ambient(const MeshSpec& mesh) const {
  Vec x = mesh.cube_center(cube);
  for (int i = 0; i < mesh.dim; ++i) x[i] += local[i];
  return x;
}

Face SkeletonPoint::face() const {
  Face f{IVec(cube.size())};
  for (int i = 0; i < cube.size(); ++i)
    f.code[i] = 2 * cube[i] + (is_pinned(i) ? (local[i] > 0.0 ? 1 : -1) : 0);
  return f;
}

CubeIndex cube_of(const Vec& x, const MeshSpec& mesh) {
  CubeIndex k(mesh.dim);
  for (int i = 0; i < mesh.dim; ++i) {
    const double y = (x[i] - mesh.translation[i]) / (2.0 * mesh.half_width);
    // |y - K| <= 1/2 with ties resolved to the smaller K.
    k[i] = static_cast<std::int64_t>(std::ceil(y - 0.5));
  }
  return k;
}

Vec local_coordinates(const Vec& x, const MeshSpec& mesh, const CubeIndex& k) {
  Vec local = x - mesh.cube_center(k);
  for (double& v : local) v = std::clamp(v, -mesh.half_width, mesh.half_width);
  return local;
}

Sector sector_of(const Vec& local, int j) {
  const int n = local.size();
  if (j < 0 || j >= n) throw PreconditionError("sector_of: need 0 <= j < n");
  std::array<int, kMaxDim> order{};
  std::iota(order.begin(), order.begin() + n, 0);
  std::stable_sort(order.begin(), order.begin() + n,
                   [&](int a, int b) { return std::abs(local[a]) > std::abs(local[b]); });
  Sector s{IVec(n - j), IVec(n - j)};
  for (int i = 0; i < n - j; ++i) {
    s.sigma[i] = order[i];
    s.q[i] = local[order[i]] < 0.0 ? -1 : 1;
  }
  return s;
}

std::vector<Face> enumerate_skeleton_faces(const MeshSpec& mesh, int j) {
  mesh.validate();
  const int n = mesh.dim;
  if (j < 0 || j > n) throw PreconditionError("enumerate_skeleton_faces: need 0 <= j <= n");
  const double eps = mesh.half_width, tol = tolerance(mesh);
  // Candidate codes per axis, for the free (even) and pinned (odd) roles.
  std::vector<std::vector<std::int64_t>> free_codes(n), pinned_codes(n);
  for (int i = 0; i < n; ++i) {
    const double t = mesh.translation[i], lo = mesh.bounds.lo[i], hi = mesh.bounds.hi[i];
    const auto cmin = static_cast<std::int64_t>(std::floor((lo - t) / eps)) - 2;
    const auto cmax = static_cast<std::int64_t>(std::ceil((hi - t) / eps)) + 2;
    for (std::int64_t c = cmin; c <= cmax; ++c) {
      const double v = t + eps * static_cast<double>(c);
      if (c % 2 == 0) {
        if (v + eps > lo + tol && v - eps < hi - tol) free_codes[i].push_back(c);
      } else {
        if (v >= lo - tol && v <= hi + tol) pinned_codes[i].push_back(c);
      }
    }
  }
  std::vector<Face> faces;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != j) continue;
    std::vector<const std::vector<std::int64_t>*> lists(n);
    bool empty = false;
    for (int i = 0; i < n; ++i) {
      lists[i] = ((mask >> i) & 1u) ? &free_codes[i] : &pinned_codes[i];
      empty = empty || lists[i]->empty();
    }
    if (empty) continue;
    std::vector<std::size_t> idx(n, 0);
    for (;;) {
      Face f{IVec(n)};
      for (int i = 0; i < n; ++i) f.code[i] = (*lists[i])[idx[i]];
      faces.push_back(f);
      int i = n - 1;
      for (; i >= 0; --i) {
        if (++idx[i] < lists[i]->size()) break;
        idx[i] = 0;
      }
      if (i < 0) break;
    }
  }
  std::sort(faces.begin(), faces.end());
  return faces;
}

double dual_skeleton_distance(const Vec& x, const MeshSpec& mesh, int j) {
  const int n = mesh.dim;
  if (j < 0 || j >= n) throw PreconditionError("dual_skeleton_distance: need 0 <= j < n");
  const Vec local = local_coordinates(x, mesh, cube_of(x, mesh));
  std::array<double, kMaxDim> a{};
  for (int i = 0; i < n; ++i) a[i] = std::abs(local[i]);
  std::sort(a.begin(), a.begin() + n, std::greater<>());
  return a[n - j - 1];
}

double face_boundary_distance(const Face& face, const MeshSpec& mesh, const Vec& x) {
  const Vec c = face.center(mesh);
  double r = 0.0;
  for (int i = 0; i < mesh.dim; ++i)
    if (face.is_free(i)) r = std::max(r, std::abs(x[i] - c[i]));
  return mesh.half_width - r;
}

}  // namespace fracsob
