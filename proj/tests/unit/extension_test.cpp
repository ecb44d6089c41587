#include <cmath>

#include "doctest.h"
#include "fracsob/errors.hpp"
#include "fracsob/extension.hpp"
#include "fracsob/manifold.hpp"
#include "fracsob/rng.hpp"
#include "fracsob/sobolev.hpp"

using namespace fracsob;

namespace {

std::shared_ptr<const MeshSpec> unit_mesh(int n, double eps = 1.0) {
  return std::make_shared<const MeshSpec>(MeshSpec{Vec(n, 0.0), eps, n, Box::cube(n, -eps, eps)});
}

}  // namespace

TEST_SUITE("extension") {
  TEST_CASE("project_to_skeleton") {
    ProjectionResult r = project_to_skeleton(Vec{0.5, 0.2}, 1, 1.0);
    CHECK(r.target[0] == 1.0);
    CHECK(r.target[1] == doctest::Approx(0.4));
    r = project_to_skeleton(Vec{0.3, -0.7}, 0, 1.0);
    CHECK(r.target == Vec{1.0, -1.0});
    r = project_to_skeleton(Vec{0.9, 0.6, 0.3}, 1, 1.0);
    CHECK(r.target[0] == 1.0);
    CHECK(r.target[1] == 1.0);
    CHECK(r.target[2] == doctest::Approx(0.5));
    r = project_to_skeleton(Vec{0.5, 0.0}, 1, 1.0);
    CHECK(r.target == Vec{1.0, 0.0});
    CHECK_THROWS_AS(project_to_skeleton(Vec{0.0, 0.0}, 1, 1.0), ExceptionalPoint);
    CHECK_THROWS_AS(project_to_skeleton(Vec{0.4, 0.0}, 0, 1.0), ExceptionalPoint);
  }

  TEST_CASE("project_step") {
    SkeletonPoint edge{IVec{0, 0}, Vec{1.0, 0.4}, 0b01, 1};
    SkeletonPoint v = project_step(edge, 1.0);
    CHECK(v.dim == 0);
    CHECK(v.local == Vec{1.0, 1.0});
    SkeletonPoint face{IVec{0, 0, 0}, Vec{1.0, 0.6, -0.2}, 0b001, 2};
    SkeletonPoint e = project_step(face, 1.0);
    CHECK(e.dim == 1);
    CHECK(e.local[1] == 1.0);
    CHECK(e.local[2] == doctest::Approx(-1.0 / 3.0));
    SkeletonPoint center{IVec{0, 0}, Vec{1.0, 0.0}, 0b01, 1};
    CHECK_THROWS_AS(project_step(center, 1.0), ExceptionalPoint);
  }

  TEST_CASE("sampled projection algebra") {
    Rng rng(21);
    for (int n = 2; n <= 3; ++n)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < 2000; ++i) {
          const double eps = 0.25;
          Vec x(n);
          for (auto& c : x) c = rng.uniform(-eps, eps);
          const ProjectionResult direct = project_to_skeleton(x, j, eps);
          SkeletonPoint pt{IVec(n, 0), x, 0, n};
          for (int k = n; k > j; --k) pt = project_step(pt, eps);
          CHECK(pt.pinned == direct.pinned);
          for (int a = 0; a < n; ++a) CHECK(pt.local[a] == doctest::Approx(direct.target[a]).epsilon(1e-12));
          // Idempotence and membership of X^n - X^j in the closed cube.
          const ProjectionResult again = project_to_skeleton(direct.target, j, eps);
          CHECK(again.target == direct.target);
          CHECK(sup_norm(x - direct.target) <= eps * (1 + 1e-12));
        }
  }

  TEST_CASE("eval_extension examples") {
    const MeshSpec m1{Vec{0.0}, 1.0, 1, Box{Vec{-1.0}, Vec{1.0}}};
    const FieldMap id = make_field("identity", 1);
    CHECK(eval_extension(id, m1, 0, Vec{0.3})[0] == 1.0);
    const MeshSpec m2{Vec{0, 0}, 1.0, 2, Box::cube(2, -1, 1)};
    const Vec v = eval_extension(vortex_map(2, 1), m2, 1, Vec{0.5, 0.2});
    CHECK(v[0] == doctest::Approx(0.92848).epsilon(1e-5));
    CHECK(v[1] == doctest::Approx(0.37139).epsilon(1e-5));
    const FieldMap c = constant_field(2, Vec{3.0, -1.0});
    for (int j = 0; j < 2; ++j) CHECK(eval_extension(c, m2, j, Vec{0.1, 0.7}) == Vec{3.0, -1.0});
    CHECK_THROWS_AS(eval_extension(c, m2, 1, Vec{1.5, 0.0}), OutOfBounds);
  }

  TEST_CASE("extension of a skeleton map") {
    auto mesh = unit_mesh(2);
    const SkeletonMap g = restrict_to_skeleton(linear_x1_field(2), mesh, 1);
    const FieldMap h = extend_skeleton_map(g, 1);
    CHECK(h(Vec{0.5, 0.2})[0] == 1.0);
  }

  TEST_CASE("homogeneity along rays and locality") {
    const MeshSpec m{Vec{0.05, -0.1}, 0.25, 2, Box::cube(2, -2, 2)};
    const FieldMap f = gauss_bump_field(Vec{0.1, 0.2}, 0.3);
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
      const Vec x{rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)};
      const IVec k = cube_of(x, m);
      const Vec c = m.cube_center(k);
      const double v = eval_extension(f, m, 1, x)[0];
      for (double lam : {0.9, 0.5, 0.1}) CHECK(eval_extension(f, m, 1, c + lam * (x - c))[0] == doctest::Approx(v));
      // Locality: a map that differs from f only away from the closed cube gives the same value.
      const FieldMap g("local", 2, 1, [&](const Vec& y) {
        return sup_dist(y, c) <= m.half_width * (1 + 1e-9) ? f(y) : Vec{1e6};
      });
      CHECK(eval_extension(g, m, 1, x)[0] == v);
    }
  }

  TEST_CASE("values of the extension are values of g") {
    auto mesh = unit_mesh(2, 0.5);
    const SkeletonMap g = restrict_to_skeleton(vortex_map(2, 1), std::make_shared<const MeshSpec>(
        MeshSpec{Vec{0.3, 0.3}, 0.5, 2, Box::cube(2, -1, 1)}), 1);
    const FieldMap h = extend_skeleton_map(g, 1);
    Rng rng(8);
    for (int i = 0; i < 1000; ++i) {
      const Vec x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
      CHECK(euclid_norm(h(x)) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("L^p of the extension scales like eps/2 times the skeleton L^p") {
    for (double eps : {1.0, 0.5}) {
      auto mesh = unit_mesh(2, eps);
      const SkeletonMap g = restrict_to_skeleton(gauss_bump_field(Vec{0.2, -0.1}, 0.7 * eps), mesh, 1);
      QuadratureSpec q;
      q.samples = 400'000;
      const double box = lp_norm(extend_skeleton_map(g, 1), mesh->bounds, 2.0, q).extra.at("p_power").get<double>();
      const double skel = skeleton_lp(g, 1, 2.0, q).value;
      CHECK(box / skel == doctest::Approx(eps / 2.0).epsilon(0.02));
    }
  }

  TEST_CASE("extension gradient") {
    const MeshSpec m{Vec{0, 0}, 1.0, 2, Box::cube(2, -1, 1)};
    const Jacobian z = extension_gradient(constant_field(2, Vec{1.0}), m, 1, Vec{0.3, 0.1});
    CHECK(z.frobenius() == 0.0);
    // Chain rule agrees with central differences of the extension.
    const FieldMap f = gauss_bump_field(Vec{0.3, 0.4}, 0.5);
    const Vec x{0.6, 0.25};
    const Jacobian J = extension_gradient(f, m, 1, x);
    for (int a = 0; a < 2; ++a) {
      Vec xp = x, xm = x;
      xp[a] += 1e-6;
      xm[a] -= 1e-6;
      const double fd = (eval_extension(f, m, 1, xp)[0] - eval_extension(f, m, 1, xm)[0]) / 2e-6;
      CHECK(J(0, a) == doctest::Approx(fd).epsilon(1e-5));
    }
    CHECK_THROWS_AS(extension_gradient(f, m, 1, Vec{0.0, 0.0}), SingularPoint);
  }

  TEST_CASE("gradient times dual distance stays bounded") {
    const MeshSpec m{Vec{0.02, 0.07}, 0.2, 2, Box::cube(2, 0, 1)};
    const FieldMap f = gauss_bump_field(Vec{0.5, 0.5}, 0.2);
    Rng rng(31);
    double half = 0.0, full = 0.0;
    for (int i = 0; i < 10'000; ++i) {
      const Vec x{rng.uniform(), rng.uniform()};
      double v;
      try {
        v = extension_gradient(f, m, 1, x).frobenius() * dual_skeleton_distance(x, m, 1);
      } catch (const SingularPoint&) {
        continue;
      }
      full = std::max(full, v);
      if (i < 5000) half = std::max(half, v);
    }
    CHECK(std::isfinite(full));
    CHECK(full <= 1.1 * half);
  }
}
