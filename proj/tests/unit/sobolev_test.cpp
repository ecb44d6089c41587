#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fracsob/manifold.hpp"
#include "fracsob/sobolev.hpp"

using namespace fracsob;

namespace {

QuadratureSpec mc(std::uint64_t samples, std::uint64_t seed = 1) {
  QuadratureSpec q;
  q.samples = samples;
  q.seed = seed;
  return q;
}

bool within(const NormReport& r, double expected, double rel, double n_se = 4.0) {
  return std::abs(r.value - expected) <= std::max(rel * std::abs(expected), n_se * r.std_error);
}

std::shared_ptr<const MeshSpec> single_square(double eps = 1.0) {
  return std::make_shared<const MeshSpec>(MeshSpec{Vec{0, 0}, eps, 2, Box::cube(2, -eps, eps)});
}

// Seminorm p-th power of g = x_1 on the four edges of [-1,1]^2, sup distance,
// kernel exponent 1 + sp, every ordered pair. Each edge-pair type integrates in
// closed form: same edge, opposite edges, and the eight ordered adjacent pairs
// (split along the diagonal at the shared corner).
double square_boundary_seminorm(double s, double p) {
  const double sp = s * p, a = p - 1.0 - sp;
  const double same = 2.0 * std::pow(2.0, a + 2.0) / ((a + 1.0) * (a + 2.0));
  const double top_bottom = 2.0 * std::pow(2.0, p + 2.0) / ((p + 1.0) * (p + 2.0)) / std::pow(2.0, 1.0 + sp);
  const double left_right = 4.0 * std::pow(2.0, p) / std::pow(2.0, 1.0 + sp);
  const double adjacent = std::pow(2.0, p - sp + 1.0) / (p - sp + 1.0) * (1.0 + 1.0 / (p + 1.0));
  return 2.0 * same + 2.0 * top_bottom + 2.0 * left_right + 8.0 * adjacent;
}

}  // namespace

TEST_SUITE("sobolev") {
  TEST_CASE("lp_norm examples") {
    const NormReport c = lp_norm(constant_field(2, Vec{2.0}), Box::cube(2, 0, 1), 2.0, mc(20'000));
    CHECK(c.value == doctest::Approx(2.0).epsilon(1e-12));
    const NormReport x = lp_norm(linear_x1_field(1), Box{Vec{0.0}, Vec{1.0}}, 2.0, mc(200'000));
    CHECK(x.value == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(0.01));
    // Unit-modulus map on the disc: the norm is area^(1/4).
    const RegionMask disc = [](const Vec& y) { return euclid_norm(y) < 1.0 && euclid_norm(y) > 1e-9; };
    const NormReport v = lp_norm(vortex_map(2, 1), Box::cube(2, -1, 1), 4.0, mc(200'000), disc);
    CHECK(v.value == doctest::Approx(std::pow(std::numbers::pi, 0.25)).epsilon(0.01));
  }

  TEST_CASE("lp_norm with a zero budget is rejected") {
    CHECK_THROWS(lp_norm(linear_x1_field(1), Box{Vec{0.0}, Vec{1.0}}, 2.0, mc(0)));
  }

  TEST_CASE("gagliardo closed forms for f(x) = x on (0,1)") {
    const Box unit{Vec{0.0}, Vec{1.0}};
    for (const auto& [s, p] : {std::pair{0.5, 2.0}, std::pair{0.5, 1.0}, std::pair{0.3, 3.0}}) {
      CAPTURE(s);
      CAPTURE(p);
      const double expect = 2.0 / ((p - s * p) * (p - s * p + 1.0));
      const NormReport r = gagliardo_seminorm_p(linear_x1_field(1), unit, s, p, mc(400'000));
      CHECK(within(r, expect, 0.02));
    }
  }

  TEST_CASE("seminorm vanishes on constants and is positive otherwise") {
    const Box b = Box::cube(2, 0, 1);
    const NormReport c = gagliardo_seminorm_p(constant_field(2, Vec{3.0}), b, 0.5, 2.0, mc(50'000));
    CHECK(c.value <= 3.0 * c.std_error + 1e-300);
    const NormReport x = gagliardo_seminorm_p(linear_x1_field(2), b, 0.5, 2.0, mc(50'000));
    CHECK(x.value > 3.0 * x.std_error);
  }

  TEST_CASE("wsp_distance") {
    const Box unit{Vec{0.0}, Vec{1.0}};
    const FieldMap f = linear_x1_field(1);
    CHECK(wsp_distance(f, f, unit, 0.5, 2.0, mc(10'000)).value == 0.0);
    const FieldMap g("shifted", 1, 1, [](const Vec& x) { return Vec{x[0] + 0.3}; });
    const NormReport r = wsp_distance(f, g, unit, 0.5, 2.0, mc(50'000));
    CHECK(r.value == doctest::Approx(0.09).epsilon(1e-9));
  }

  TEST_CASE("scaling under dilation") {
    const FieldMap f = gauss_bump_field(Vec{0.5, 0.5}, 0.3);
    const double s = 0.4, p = 2.0;
    const NormReport base = gagliardo_seminorm_p(f, Box::cube(2, 0, 1), s, p, mc(400'000));
    for (double L : {0.5, 2.0}) {
      CAPTURE(L);
      const FieldMap fl("dilated", 2, 1, [&](const Vec& x) { return f((1.0 / L) * x); });
      const NormReport r = gagliardo_seminorm_p(fl, Box::cube(2, 0, L), s, p, mc(400'000));
      CHECK(within(r, std::pow(L, 2.0 - s * p) * base.value, 0.03));
    }
  }

  TEST_CASE("doubling the budget is consistent") {
    const Box unit{Vec{0.0}, Vec{1.0}};
    const NormReport a = gagliardo_seminorm_p(linear_x1_field(1), unit, 0.5, 2.0, mc(100'000, 3));
    const NormReport b = gagliardo_seminorm_p(linear_x1_field(1), unit, 0.5, 2.0, mc(200'000, 4));
    CHECK(std::abs(a.value - b.value) <= 3.0 * std::hypot(a.std_error, b.std_error));
  }

  TEST_CASE("w1r examples") {
    const NormReport x = w1r_seminorm(linear_x1_field(2), Box::cube(2, 0, 1), 3.0, mc(10'000));
    CHECK(x.value == doctest::Approx(1.0).epsilon(1e-6));
    W1rOptions wo;
    wo.singular_distance = [](const Vec& y) { return std::hypot(y[0], y[1]); };
    const RegionMask disc = [](const Vec& y) { return euclid_norm(y) < 1.0; };
    // Uniform sampling rarely lands near the singular point, so the refinement runs on cubature.
    QuadratureSpec grid;
    grid.method = QuadMethod::TensorGrid;
    const NormReport v1 = w1r_seminorm(vortex_map(2, 1), Box::cube(2, -1, 1), 1.0, grid, disc, wo);
    CHECK_FALSE(v1.divergent);
    CHECK(v1.value == doctest::Approx(2.0 * std::numbers::pi).epsilon(0.01));
    const NormReport v2 = w1r_seminorm(vortex_map(2, 1), Box::cube(2, -1, 1), 2.0, grid, disc, wo);
    CHECK(v2.divergent);
  }

  TEST_CASE("skeleton seminorm of x_1 on the boundary of one square") {
    const double s = 0.5, p = 2.0;
    const SkeletonMap g = restrict_to_skeleton(linear_x1_field(2), single_square(), 1);
    const double expect = square_boundary_seminorm(s, p);
    const NormReport r = skeleton_gagliardo_p(g, 1, s, p, mc(400'000));
    CHECK(within(r, expect, 0.05));
    // Stable as the budget grows.
    const NormReport r2 = skeleton_gagliardo_p(g, 1, s, p, mc(800'000, 2));
    CHECK(std::abs(r2.value - r.value) <= 0.05 * expect);
    // Using the ambient exponent n + sp instead of j + sp only increases the value here.
    const NormReport wrong = skeleton_gagliardo_p(g, 1, s, p, mc(400'000), false, 2.0 + s * p);
    CHECK(wrong.value > r.value);
  }

  TEST_CASE("skeleton seminorm and cross term vanish on constants") {
    const SkeletonMap g = restrict_to_skeleton(constant_field(2, Vec{1.0, 2.0}), single_square(), 1);
    CHECK(skeleton_gagliardo_p(g, 1, 0.6, 2.0, mc(20'000)).value == 0.0);
    CHECK(cross_term(g, 1, 0.6, 2.0, mc(20'000)).value == 0.0);
  }

  TEST_CASE("cross term closed form on one cube") {
    for (double eps : {1.0, 0.25})
      for (const auto& [s, p] : {std::pair{0.6, 2.0}, std::pair{0.5, 3.0}}) {
        CAPTURE(eps);
        const SkeletonMap g = restrict_to_skeleton(linear_x1_field(2), single_square(eps), 1);
        const double e = p - s * p + 1.0;
        const NormReport r = cross_term(g, 1, s, p, mc(200'000));
        CHECK(within(r, 4.0 * std::pow(eps, e) / e, 0.03));
      }
  }

  TEST_CASE("membership: Lipschitz passes, a jump at a vertex with sp > 1 fails") {
    auto mesh = std::make_shared<const MeshSpec>(MeshSpec{Vec{0, 0}, 0.5, 2, Box::cube(2, -1, 1)});
    const SkeletonMap lip = restrict_to_skeleton(gauss_bump_field(Vec{0.2, 0.1}, 0.5), mesh, 1);
    CHECK(wspj_membership(lip, 1, 0.6, 2.0, mc(100'000)).member);
    const FieldMap step("step", 2, 1, [](const Vec& x) { return Vec{x[0] > 0.5 ? 1.0 : 0.0}; });
    const MembershipReport bad = wspj_membership(restrict_to_skeleton(step, mesh, 1), 1, 0.6, 2.0, mc(100'000));
    CHECK_FALSE(bad.member);
  }

  TEST_CASE("kernel at opposite points of the unit square is finite") {
    const Vec omega{1.0, 0.5}, lambda{-1.0, -0.5};
    const CubatureResult k = kernel_k(omega, sector_of(omega, 1), lambda, sector_of(lambda, 1), 1, 0.5, 2.0);
    CHECK(std::isfinite(k.value));
    CHECK(k.value > 0.0);
  }

  TEST_CASE("kernel ratio stays bounded as omega approaches lambda along an edge") {
    const Vec lambda{1.0, 0.2};
    double worst = 0.0;
    for (double d : {0.2, 0.1, 0.05, 0.025}) {
      const Vec omega{1.0, 0.2 + d};
      const CubatureResult k =
          kernel_k(omega, sector_of(omega, 1), lambda, sector_of(lambda, 1), 1, 0.5, 2.0, {1e-4, 0.0, 400'000});
      const double ratio = k.value * std::pow(d, 1.0 + 1.0);
      if (worst > 0.0) CHECK(ratio <= 2.0 * worst);
      worst = std::max(worst, ratio);
    }
  }

  TEST_CASE("quadrature spec validation and json") {
    QuadratureSpec q;
    q.samples = 10;
    q.seed = 99;
    q.refinement_check = true;
    const QuadratureSpec r = QuadratureSpec::from_json(q.to_json());
    CHECK(r.samples == 10);
    CHECK(r.seed == 99);
    CHECK(r.refinement_check);
    SobolevParams bad{1.5, 2.0, 1};
    CHECK_THROWS(bad.validate());
    SobolevParams one{1.0, 2.0, 1};
    CHECK_NOTHROW(one.validate());
    CHECK_THROWS(one.validate_fractional());
  }
}
