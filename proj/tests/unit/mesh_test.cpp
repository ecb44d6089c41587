#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fracsob/mesh.hpp"
#include "fracsob/rng.hpp"

using namespace fracsob;

namespace {

MeshSpec mesh_of(const Vec& T, double eps, const Box& b) { return {T, eps, T.size(), b}; }

std::size_t binomial(int n, int k) {
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST_SUITE("mesh") {
  TEST_CASE("cube_of") {
    const MeshSpec m = mesh_of(Vec{0, 0}, 1.0, Box::cube(2, -5, 5));
    CHECK(cube_of(Vec{0.3, -0.2}, m) == IVec{0, 0});
    CHECK(cube_of(Vec{2.1, 0.0}, m) == IVec{1, 0});
    const MeshSpec m1 = mesh_of(Vec{0.2}, 0.5, Box{Vec{-2.0}, Vec{2.0}});
    CHECK(cube_of(Vec{0.5}, m1) == IVec{0});
  }

  TEST_CASE("boundary points go to the smallest candidate index") {
    const MeshSpec m = mesh_of(Vec{0, 0}, 1.0, Box::cube(2, -5, 5));
    CHECK(cube_of(Vec{1.0, 1.0}, m) == IVec{0, 0});
    CHECK(cube_of(Vec{-1.0, 0.5}, m) == IVec{-1, 0});
  }

  TEST_CASE("sector_of") {
    Sector s = sector_of(Vec{0.9, 0.1}, 1);
    CHECK(s.sigma == IVec{0});
    CHECK(s.q == IVec{1});
    s = sector_of(Vec{0.3, -0.7}, 0);
    CHECK(s.sigma == IVec{1, 0});
    CHECK(s.q == IVec{-1, 1});
    s = sector_of(Vec{0.5, 0.5}, 1);
    CHECK(s.sigma == IVec{0});
    CHECK(s.q == IVec{1});
    CHECK(sector_of(Vec{0.0, 0.0}, 1).q == IVec{1});
  }

  TEST_CASE("enumerated faces") {
    CHECK(enumerate_skeleton_faces(mesh_of(Vec{0.0}, 1.0, Box{Vec{-1.0}, Vec{3.0}}), 0).size() == 3);
    const MeshSpec sq = mesh_of(Vec{0, 0}, 1.0, Box::cube(2, -1, 1));
    CHECK(enumerate_skeleton_faces(sq, 1).size() == 4);
    CHECK(enumerate_skeleton_faces(sq, 2).size() == 1);
    for (int n = 1; n <= 3; ++n) {
      const MeshSpec m = mesh_of(Vec(n, 0.0), 0.5, Box::cube(n, -0.5, 0.5));
      for (int j = 0; j <= n; ++j) {
        CAPTURE(n);
        CAPTURE(j);
        CHECK(enumerate_skeleton_faces(m, j).size() == binomial(n, j) * (std::size_t{1} << (n - j)));
      }
    }
  }

  TEST_CASE("faces are unique and carry n-j odd code entries") {
    const MeshSpec m = mesh_of(Vec{0.1, -0.2, 0.05}, 0.25, Box::cube(3, 0, 1));
    for (int j = 0; j <= 3; ++j) {
      auto faces = enumerate_skeleton_faces(m, j);
      auto sorted = faces;
      std::sort(sorted.begin(), sorted.end());
      CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
      for (const Face& f : faces) CHECK(f.dim() == j);
    }
  }

  TEST_CASE("dual skeleton distance") {
    const MeshSpec m2 = mesh_of(Vec{0, 0}, 1.0, Box::cube(2, -3, 3));
    // The dual skeleton of the 1-skeleton in the plane is the set of cube centers.
    CHECK(dual_skeleton_distance(Vec{0.3, -0.7}, m2, 1) == doctest::Approx(0.7));
    CHECK(dual_skeleton_distance(Vec{0.0, 0.0}, m2, 1) == 0.0);
    const MeshSpec m3 = mesh_of(Vec{0, 0, 0}, 1.0, Box::cube(3, -3, 3));
    CHECK(dual_skeleton_distance(Vec{0.9, 0.6, 0.3}, m3, 1) == doctest::Approx(0.6));
  }

  TEST_CASE("dual distance matches a brute-force search over the dual lines") {
    const MeshSpec m = mesh_of(Vec{0.1, 0.2, -0.1}, 0.5, Box::cube(3, -2, 2));
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      const Vec x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      // Lines through cube centers parallel to one axis, sampled densely.
      double best = INFINITY;
      const IVec k = cube_of(x, m);
      for (int dk0 = -1; dk0 <= 1; ++dk0)
        for (int dk1 = -1; dk1 <= 1; ++dk1)
          for (int dk2 = -1; dk2 <= 1; ++dk2) {
            const Vec c = m.cube_center(IVec{k[0] + dk0, k[1] + dk1, k[2] + dk2});
            for (int axis = 0; axis < 3; ++axis)
              for (int t = -400; t <= 400; ++t) {
                Vec y = c;
                y[axis] += t * (2 * m.half_width) / 400.0;
                best = std::min(best, sup_dist(x, y));
              }
          }
      CHECK(dual_skeleton_distance(x, m, 1) == doctest::Approx(best).epsilon(0.01).scale(0.0025));
    }
  }

  TEST_CASE("sampled partition and sector ordering") {
    const MeshSpec m = mesh_of(Vec{0.13, -0.31}, 0.2, Box::cube(2, 0, 1));
    Rng rng(11);
    for (int i = 0; i < 10'000; ++i) {
      const Vec x{rng.uniform(), rng.uniform()};
      const IVec k = cube_of(x, m);
      const Vec local = local_coordinates(x, m, k);
      CHECK(sup_norm(local) <= m.half_width * (1 + 1e-12));
      for (int j = 0; j < 2; ++j) {
        const Sector s = sector_of(local, j);
        for (int a = 0; a + 1 < 2 - j; ++a)
          CHECK(std::abs(local[s.sigma[a]]) >= std::abs(local[s.sigma[a + 1]]));
        for (int a = 0; a < 2 - j; ++a) CHECK((local[s.sigma[a]] >= 0 ? 1 : -1) == s.q[a]);
      }
    }
  }

  TEST_CASE("mesh json round trip") {
    const MeshSpec m = mesh_of(Vec{0.1, 0.2}, 0.3, Box::cube(2, 0, 1));
    const MeshSpec r = MeshSpec::from_json(m.to_json());
    CHECK(r.translation == m.translation);
    CHECK(r.half_width == m.half_width);
    CHECK(r.bounds.lo == m.bounds.lo);
    CHECK(r.bounds.hi == m.bounds.hi);
  }

  TEST_CASE("invalid meshes are rejected") {
    CHECK_THROWS(mesh_of(Vec{0, 0}, 0.0, Box::cube(2, 0, 1)).validate());
    CHECK_THROWS(mesh_of(Vec{0, 0}, 1.0, Box{Vec{0, 0}, Vec{0, 1}}).validate());
  }
}
