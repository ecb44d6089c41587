#include <cmath>

#include "doctest.h"
#include "fracsob/errors.hpp"
#include "fracsob/pipeline.hpp"

using namespace fracsob;

namespace {

std::shared_ptr<const MeshSpec> square(double eps, Vec T = {0.0, 0.0}, double half = 1.0) {
  return std::make_shared<const MeshSpec>(MeshSpec{T, eps, 2, Box::cube(2, -half, half)});
}

// Point on the right edge x_1 = eps of the cube at the origin.
SkeletonPoint on_right_edge(double y, double eps = 1.0) { return {IVec{0, 0}, Vec{eps, y}, 0b01, 1}; }

QuadratureSpec mc(std::uint64_t n) {
  QuadratureSpec q;
  q.samples = n;
  return q;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("fill_hole on an edge") {
    const SkeletonMap g = restrict_to_skeleton(make_field("identity", 2), square(1.0), 1);
    const SkeletonMap gm = fill_hole(g, 0.4);
    CHECK(gm(on_right_edge(0.25))[1] == doctest::Approx(0.25 / 0.6).epsilon(1e-14));
    CHECK(gm(on_right_edge(0.8))[1] == 1.0);
    CHECK(gm(on_right_edge(-0.8))[1] == -1.0);
    CHECK(gm(on_right_edge(0.0))[1] == 0.0);
    // Small mu barely moves points away from the collar.
    const SkeletonMap tiny = fill_hole(g, 1e-9);
    CHECK(tiny(on_right_edge(0.3))[1] == doctest::Approx(0.3).epsilon(1e-8));
    CHECK_THROWS_AS(fill_hole(g, 0.5), PreconditionError);
    CHECK_THROWS_AS(fill_hole(g, 0.0), PreconditionError);
  }

  TEST_CASE("mollifier density integrates to one") {
    const double lo[1] = {-1.0}, hi[1] = {1.0};
    const CubatureResult c =
        adaptive_cubature([](std::span<const double> x) { return MollifierSpec::bump(x[0]); }, lo, hi, {1e-10});
    CHECK(c.value == doctest::Approx(1.0).epsilon(1e-6));
    const MollifierSpec spec(0.05);
    double w = 0.0;
    for (double x : spec.rule_weights()) w += x;
    CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("mollification reproduces affine maps") {
    const SkeletonMap c = restrict_to_skeleton(constant_field(2, Vec{2.5}), square(1.0), 1);
    const SkeletonMap lin = restrict_to_skeleton(make_field("identity", 2), square(1.0), 1);
    const MollifierSpec spec(0.1);
    CHECK(mollify_on_cube(c, spec, on_right_edge(0.3))[0] == doctest::Approx(2.5).epsilon(1e-14));
    const Vec v = mollify_on_cube(lin, spec, on_right_edge(0.3));
    CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(0.3).epsilon(1e-13));
    CHECK_THROWS_AS(mollify_on_cube(lin, spec, on_right_edge(0.95)), WindowEscapes);
  }

  TEST_CASE("mollified vortex edge stays close to the vortex") {
    const double eps = 0.5;
    const SkeletonMap g = restrict_to_skeleton(vortex_map(2, 1), square(eps), 1);
    const MollifierSpec spec(0.05);
    double worst = 0.0;
    for (int i = -90; i <= 90; ++i) {
      const SkeletonPoint pt = on_right_edge(eps * i / 100.0, eps);
      worst = std::max(worst, euclid_dist(mollify_on_cube(g, spec, pt), g(pt)));
    }
    CHECK(worst < 0.01);
  }

  TEST_CASE("blend of constants is constant") {
    auto mesh = square(0.5);
    const SkeletonMap g = restrict_to_skeleton(constant_field(2, Vec{0.0, 1.0}), mesh, 1);
    const SkeletonMap F = restrict_to_skeleton(constant_field(2, Vec{0.0, 1.0}), mesh, 0);
    const double mu = 0.25;
    const SkeletonMap G = blend_lipschitz(g, F, MollifierSpec(mu / 4), CutoffProfile::for_mu(mu));
    for (double y : {-0.49, -0.3, 0.0, 0.2, 0.45}) {
      const Vec v = G(on_right_edge(y, 0.5));
      CHECK(v[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
      CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(blend_lipschitz(g, F, MollifierSpec(mu / 2), CutoffProfile::for_mu(mu)), PreconditionError);
  }

  TEST_CASE("cutoff profile") {
    const CutoffProfile c = CutoffProfile::for_mu(0.3);
    CHECK(c(0.0) == 1.0);
    CHECK(c(0.85) == 1.0);
    CHECK(c(0.9) == 0.0);
    CHECK(c(0.87) > 0.0);
    CHECK(c(0.87) < 1.0);
  }

  TEST_CASE("default schedule") {
    const Schedule s = Schedule::defaults();
    REQUIRE(s.mu.size() == 3);
    CHECK(s.mu[0] == 0.25);
    CHECK(s.mu[2] == 0.0625);
    CHECK(s.t[1] == 0.125 / 4);
    CHECK_NOTHROW(s.validate());
    CHECK(Schedule::from_json(s.to_json()).mu == s.mu);
  }

  TEST_CASE("hole-filling error decreases with mu") {
    auto mesh = square(0.25, Vec{0.1, 0.05});
    const SkeletonMap g = restrict_to_skeleton(gauss_bump_field(Vec{0.1, 0.2}, 0.4), mesh, 1);
    double prev = INFINITY;
    for (double mu : {0.3, 0.2, 0.1, 0.05}) {
      const double e = skeleton_wsp_distance(fill_hole(g, mu), g, 1, 0.6, 2.0, mc(100'000)).value;
      CHECK(e < prev);
      prev = e;
    }
  }

  TEST_CASE("Lipschitz approximation of the vortex on a 1-skeleton") {
    auto mesh = square(0.25, Vec{0.13, 0.29});
    const SkeletonMap g = restrict_to_skeleton(vortex_map(2, 1), mesh, 1);
    ApproximationOptions ao;
    ao.quad = mc(100'000);
    ao.lipschitz_pairs = 4000;
    const ApproximationResult r = lipschitz_approximate(g, ManifoldTarget::sphere(1), 0.6, 2.0, Schedule::defaults(), ao);
    REQUIRE(r.stages.size() == 3);
    CHECK(r.stages.back().error.value < r.stages.front().error.value);
    for (const StageRecord& st : r.stages) {
      CHECK(st.tube.passed);
      CHECK(std::isfinite(st.lipschitz.constant));
      CHECK(st.lipschitz.constant <= 1.5 * st.lipschitz.constant_half + 1e-12);
    }
    // Every stage is S^1-valued.
    for (double y : {-0.2, 0.0, 0.17}) CHECK(euclid_norm(r.maps.back()(on_right_edge(y, 0.25))) == doctest::Approx(1.0));
  }

  TEST_CASE("a constant map passes through the pipeline unchanged") {
    PipelineOptions o;
    o.omega = Box::cube(2, 0, 1);
    o.eps = {0.4, 0.2};
    o.t_count = 2;
    o.quad = mc(20'000);
    o.select_quad = mc(5'000);
    o.approx.quad = mc(5'000);
    o.approx.lipschitz_pairs = 500;
    o.approx.tube_samples = 200;
    o.check_membership = false;
    const PipelineReport rep = thme_pipeline(constant_field(2, Vec{0.0, 1.0}), ManifoldTarget::sphere(1), o);
    REQUIRE(rep.levels.size() == 2);
    for (const auto& lvl : rep.levels) CHECK(lvl.error.value <= 1e-20);
    CHECK(rep.j == 1);
  }

  TEST_CASE("pipeline preconditions") {
    PipelineOptions o;
    o.omega = Box::cube(2, 0, 1);
    o.s = 0.4;  // sp < 1
    CHECK_THROWS(thme_pipeline(constant_field(2, Vec{0.0, 1.0}), ManifoldTarget::sphere(1), o));
    o.s = 0.6;
    o.eps = {0.1, 0.2};
    CHECK_THROWS(thme_pipeline(constant_field(2, Vec{0.0, 1.0}), ManifoldTarget::sphere(1), o));
  }
}
