#include "fracsob/manifold.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "fracsob/errors.hpp"
#include "fracsob/numerics.hpp"
#include "fracsob/rng.hpp"

namespace fracsob {

ManifoldTarget ManifoldTarget::sphere(int k, double delta) {
  if (k < 1 || k + 1 > kMaxDim) throw ConfigError("sphere: need 1 <= k < kMaxDim");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("sphere: tube radius must lie in (0, 1)");
  ManifoldTarget t;
  t.kind_ = Kind::Sphere;
  t.m_ = k + 1;
  t.delta_ = delta;
  t.factors_ = {k};
  return t;
}

ManifoldTarget ManifoldTarget::product(std::vector<int> ks, double delta) {
  if (ks.empty()) throw ConfigError("product: no factors");
  int m = 0;
  for (int k : ks) {
    if (k < 1) throw ConfigError("product: factor dimension must be >= 1");
    m += k + 1;
  }
  if (m > kMaxDim) throw ConfigError("product: ambient dimension exceeds kMaxDim");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("product: tube radius must lie in (0, 1)");
  ManifoldTarget t;
  t.kind_ = Kind::Product;
  t.m_ = m;
  t.delta_ = delta;
  t.factors_ = std::move(ks);
  return t;
}

ManifoldTarget ManifoldTarget::custom(int ambient_dim, DistanceFn distance, ProjectFn project, double delta) {
  if (!distance || !project) throw ConfigError("custom manifold needs distance and projection");
  if (!(delta > 0.0)) throw ConfigError("custom manifold: delta must be positive");
  ManifoldTarget t;
  t.kind_ = Kind::Custom;
  t.m_ = ambient_dim;
  t.delta_ = delta;
  t.distance_ = std::move(distance);
  t.project_ = std::move(project);
  return t;
}

ManifoldTarget ManifoldTarget::from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "sphere");
  const double delta = j.value("delta", 0.2);
  if (kind == "sphere") return sphere(j.value("k", 1), delta);
  if (kind == "product") return product(j.at("factors").get<std::vector<int>>(), delta);
  throw ConfigError("unknown manifold kind '" + kind + "'");
}

nlohmann::json ManifoldTarget::to_json() const {
  switch (kind_) {
    case Kind::Sphere: return {{"kind", "sphere"}, {"k", factors_[0]}, {"delta", delta_}};
    case Kind::Product: return {{"kind", "product"}, {"factors", factors_}, {"delta", delta_}};
    case Kind::Custom: break;
  }
  return {{"kind", "custom"}, {"m", m_}, {"delta", delta_}};
}

double ManifoldTarget::distance(const Vec& x) const {
  if (kind_ == Kind::Custom) return distance_(x);
  double s = 0.0;
  int off = 0;
  for (int k : factors_) {
    double r2 = 0.0;
    for (int i = 0; i <= k; ++i) r2 += x[off + i] * x[off + i];
    const double d = std::sqrt(r2) - 1.0;
    s += d * d;
    off += k + 1;
  }
  return std::sqrt(s);
}

Vec ManifoldTarget::project_unchecked(const Vec& x) const {
  if (kind_ == Kind::Custom) return project_(x);
  Vec y = x;
  int off = 0;
  for (int k : factors_) {
    double r2 = 0.0;
    for (int i = 0; i <= k; ++i) r2 += x[off + i] * x[off + i];
    const double r = std::sqrt(r2);
    if (r == 0.0) throw OutsideTube("projection undefined at the sphere center");
    for (int i = 0; i <= k; ++i) y[off + i] = x[off + i] / r;
    off += k + 1;
  }
  return y;
}

Vec nearest_point_projection(const Vec& x, const ManifoldTarget& target) {
  if (x.size() != target.ambient_dim()) throw PreconditionError("projection: dimension mismatch");
  const double d = target.distance(x);
  if (!(d <= target.delta())) throw OutsideTube("point at distance " + std::to_string(d) + " exceeds tube radius");
  return target.project_unchecked(x);
}

bool in_tube(const Vec& x, const ManifoldTarget& target) { return target.distance(x) <= target.delta(); }

TubeCheck uniform_tube_check(const std::function<Vec(std::size_t)>& values, std::size_t count,
                             const ManifoldTarget& target) {
  TubeCheck out;
  for (std::size_t i = 0; i < count; ++i) {
    Vec v;
    try {
      v = values(i);
    } catch (const ExceptionalPoint&) {
      ++out.skipped;
      continue;
    }
    out.max_distance = std::max(out.max_distance, target.distance(v));
    ++out.samples;
  }
  out.passed = out.max_distance <= target.delta();
  return out;
}

TubeCheck uniform_tube_check(const FieldMap& u, const ManifoldTarget& target, const Box& region,
                             std::size_t samples, std::uint64_t seed) {
  Rng rng(seed, "tube-check", 0);
  return uniform_tube_check(
      [&](std::size_t) {
        Vec x(region.dim());
        for (int i = 0; i < region.dim(); ++i) x[i] = rng.uniform(region.lo[i], region.hi[i]);
        return u(x);
      },
      samples, target);
}

FieldMap vortex_map(int n, int k) {
  if (k < 1 || k + 1 > n) throw ConfigError("vortex: need 2 <= k+1 <= n");
  auto eval = [n, k](const Vec& x) {
    Vec y(k + 1);
    double r2 = 0.0;
    for (int i = 0; i <= k; ++i) r2 += x[i] * x[i];
    if (r2 == 0.0) throw ExceptionalPoint("vortex: point on the singular plane");
    const double r = std::sqrt(r2);
    for (int i = 0; i <= k; ++i) y[i] = x[i] / r;
    (void)n;
    return y;
  };
  // d(x/r) = (I - y y^T) / r on the first k+1 axes.
  auto jac = [n, k](const Vec& x) {
    Jacobian J(k + 1, n);
    double r2 = 0.0;
    for (int i = 0; i <= k; ++i) r2 += x[i] * x[i];
    if (r2 == 0.0) throw ExceptionalPoint("vortex: point on the singular plane");
    const double r = std::sqrt(r2);
    for (int a = 0; a <= k; ++a)
      for (int b = 0; b <= k; ++b) J(a, b) = ((a == b ? 1.0 : 0.0) - x[a] * x[b] / r2) / r;
    return J;
  };
  return FieldMap("vortex", n, k + 1, eval, jac);
}

WindingDetail winding_detail(const FieldMap& u, const Vec& center, double radius, int samples) {
  if (u.out_dim() != 2) throw PreconditionError("winding number needs an S^1-valued map");
  if (center.size() != u.in_dim() || u.in_dim() < 2) throw PreconditionError("winding: bad center");
  if (samples < 3 || !(radius > 0.0)) throw PreconditionError("winding: need samples >= 3 and radius > 0");
  std::vector<double> phase(samples);
  for (int i = 0; i < samples; ++i) {
    const double th = 2.0 * std::numbers::pi * i / samples;
    Vec x = center;
    x[0] += radius * std::cos(th);
    x[1] += radius * std::sin(th);
    const Vec v = u(x);
    phase[i] = std::atan2(v[1], v[0]);
  }
  WindingDetail d;
  std::vector<double> inc(samples);
  for (int i = 0; i < samples; ++i) {
    double a = phase[(i + 1) % samples] - phase[i];
    a = std::remainder(a, 2.0 * std::numbers::pi);  // principal branch in [-pi, pi]
    inc[i] = a;
    d.max_increment = std::max(d.max_increment, std::abs(a));
  }
  d.turns = pairwise_sum(inc) / (2.0 * std::numbers::pi);
  return d;
}

int winding_number(const FieldMap& u, const Vec& center, double radius, int samples) {
  const WindingDetail d = winding_detail(u, center, radius, samples);
  if (d.max_increment >= std::numbers::pi)
    throw Undersampled("phase increment reached pi; increase the sample count");
  if (d.max_increment >= std::numbers::pi / 2)
    throw Undersampled("phase increment above pi/2; rounding to an integer is not certified");
  return static_cast<int>(std::lround(d.turns));
}

}  // namespace fracsob
