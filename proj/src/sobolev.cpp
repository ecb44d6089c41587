#include "fracsob/sobolev.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fracsob/errors.hpp"
#include "fracsob/rng.hpp"

namespace fracsob {

// ---------------------------------------------------------------------------
// parameters and reports

void SobolevParams::validate() const {
  if (!(s > 0.0 && s <= 1.0)) throw ConfigError("s must lie in (0, 1]");
  if (!(p >= 1.0) || !std::isfinite(p)) throw ConfigError("p must be a finite number >= 1");
}

void SobolevParams::validate_fractional() const {
  validate();
  if (!(s < 1.0)) throw ConfigError("the Gagliardo kernel needs 0 < s < 1 (got s >= 1)");
}

nlohmann::json SobolevParams::to_json() const {
  nlohmann::json out{{"s", s}, {"p", p}};
  if (j >= 0) out["j"] = j;
  return out;
}

SobolevParams SobolevParams::from_json(const nlohmann::json& j) {
  SobolevParams out;
  out.s = j.value("s", out.s);
  out.p = j.value("p", out.p);
  out.j = j.value("j", -1);
  return out;
}

void QuadratureSpec::validate() const {
  if (samples == 0) throw ConfigError("quadrature: sample budget must be positive");
  if (!(diagonal_cutoff >= 0.0)) throw ConfigError("quadrature: diagonal cutoff must be >= 0");
}

nlohmann::json QuadratureSpec::to_json() const {
  return {{"method", method == QuadMethod::MonteCarloPairs ? "monte-carlo-pairs" : "tensor-grid"},
          {"samples", samples},
          {"diagonal_cutoff", diagonal_cutoff},
          {"seed", seed},
          {"kernel", euclidean_kernel ? "euclidean" : "sup"},
          {"refinement_check", refinement_check}};
}

QuadratureSpec QuadratureSpec::from_json(const nlohmann::json& j) {
  QuadratureSpec q;
  const std::string m = j.value("method", "monte-carlo-pairs");
  if (m == "monte-carlo-pairs")
    q.method = QuadMethod::MonteCarloPairs;
  else if (m == "tensor-grid")
    q.method = QuadMethod::TensorGrid;
  else
    throw ConfigError("unknown quadrature method '" + m + "'");
  q.samples = j.value("samples", q.samples);
  q.diagonal_cutoff = j.value("diagonal_cutoff", q.diagonal_cutoff);
  q.seed = j.value("seed", q.seed);
  const std::string k = j.value("kernel", "sup");
  if (k != "sup" && k != "euclidean") throw ConfigError("kernel must be 'sup' or 'euclidean'");
  q.euclidean_kernel = k == "euclidean";
  q.refinement_check = j.value("refinement_check", false);
  q.validate();
  return q;
}

nlohmann::json NormReport::to_json() const {
  nlohmann::json out{{"op", op},           {"value", value},     {"std_error", std_error},
                     {"params", params.to_json()}, {"quad", quad.to_json()}, {"divergent", divergent},
                     {"skipped", skipped}};
  if (!extra.empty()) out["extra"] = extra;
  return out;
}

// ---------------------------------------------------------------------------
// radial law

RadialLaw RadialLaw::for_kernel(double s, double p, double lo, double hi) {
  RadialLaw law;
  law.lo = lo;
  law.hi = hi;
  law.gamma[0] = p - s * p;  // smooth differences: |df|^p ~ r^p
  law.gamma[1] = 1.0 - s * p;  // jumps: |df|^p ~ 1 on a fraction ~ r of the pairs
  const double floor = lo > 0.0 ? -1e300 : 0.05;
  for (double& g : law.gamma) g = std::max(g, floor);
  return law;
}

double RadialLaw::sample(double u, int component) const {
  const double g = gamma[component];
  if (std::abs(g) < 1e-12) return lo * std::pow(hi / lo, u);
  if (lo == 0.0) return hi * std::pow(u, 1.0 / g);
  const double a = std::pow(lo, g), b = std::pow(hi, g);
  return std::pow(a + u * (b - a), 1.0 / g);
}

double RadialLaw::density(double r) const {
  double d = 0.0;
  for (double g : gamma) {
    if (std::abs(g) < 1e-12)
      d += 0.5 / (r * std::log(hi / lo));
    else
      d += 0.5 * g * std::pow(r, g - 1.0) / (std::pow(hi, g) - (lo == 0.0 ? 0.0 : std::pow(lo, g)));
  }
  return d;
}

namespace {

double value_dist_p(const Vec& a, const Vec& b, double p) {
  const double d = euclid_dist(a, b);
  return p == 2.0 ? d * d : std::pow(d, p);
}

double value_norm_p(const Vec& a, double p) {
  const double d = euclid_norm(a);
  return p == 2.0 ? d * d : std::pow(d, p);
}

// Uniform direction on the boundary of [-1,1]^d from a face index in [0, 2d)
// and d-1 uniforms.
Vec sup_sphere_point(int d, int face, std::span<const double> u) {
  Vec w(d);
  const int axis = face / 2;
  int k = 0;
  for (int i = 0; i < d; ++i) w[i] = i == axis ? (face % 2 ? 1.0 : -1.0) : 2.0 * u[k++] - 1.0;
  return w;
}

double sup_sphere_area(int d) { return d * std::ldexp(1.0, d); }

double euclid_sphere_area(int d) { return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d); }

Vec euclid_sphere_point(int d, Rng& rng) {
  for (;;) {
    Vec w(d);
    double r2 = 0.0;
    for (int i = 0; i < d; i += 2) {
      const double a = std::sqrt(-2.0 * std::log(rng.uniform_open())), th = 2.0 * std::numbers::pi * rng.uniform();
      w[i] = a * std::cos(th);
      if (i + 1 < d) w[i + 1] = a * std::sin(th);
    }
    for (double x : w) r2 += x * x;
    if (r2 > 0.0) return (1.0 / std::sqrt(r2)) * w;
  }
}

double stratified_u(std::uint64_t i, std::uint64_t total, double jitter) {
  const std::uint64_t strata = (total + 1) / 2;
  return (static_cast<double>(i / 2) + jitter) / static_cast<double>(strata);
}

struct PairMoments {
  Moments lp, semi, total;
  std::uint64_t skipped = 0;
};

PairMoments reduce_pairs(const std::vector<PairMoments>& parts) {
  std::vector<Moments> a, b, c;
  PairMoments out;
  for (const auto& p : parts) {
    a.push_back(p.lp);
    b.push_back(p.semi);
    c.push_back(p.total);
    out.skipped += p.skipped;
  }
  out.lp = reduce_moments(a);
  out.semi = reduce_moments(b);
  out.total = reduce_moments(c);
  return out;
}

// Box pair sampler: X uniform in the box, Y = X + r w with w uniform on the unit
// sphere of the kernel norm and r from the radial law.
struct BoxPairs {
  const Box& box;
  double s, p;
  bool euclid;
  RadialLaw law;
  double area;
  double volume;
  int n;

  BoxPairs(const Box& b, double s_, double p_, const QuadratureSpec& q)
      : box(b), s(s_), p(p_), euclid(q.euclidean_kernel), n(b.dim()) {
    const double diam = euclid ? euclid_norm(b.hi - b.lo) : b.diameter();
    if (q.diagonal_cutoff >= diam) throw ConfigError("diagonal cutoff exceeds the domain diameter");
    law = RadialLaw::for_kernel(s, p, q.diagonal_cutoff, diam);
    area = euclid ? euclid_sphere_area(n) : sup_sphere_area(n);
    volume = b.volume();
  }

  // Kernel factor of the pair weight: |B| A r^{n-1} / (r^{n+sp} q(r)).
  double factor(double r) const { return volume * area * std::pow(r, -1.0 - s * p) / law.density(r); }
};

PairMoments box_pair_mc(const FieldMap& d, const Box& box, double s, double p, const QuadratureSpec& q,
                        std::string_view tag, bool include_lp) {
  BoxPairs bp(box, s, p, q);
  const int n = box.dim();
  const std::uint64_t N = q.samples;
  const std::uint64_t chunks = (N + kChunkSize - 1) / kChunkSize;
  const std::string tg(tag);
  auto parts = run_chunks<PairMoments>(chunks, [&](std::size_t c) {
    Rng rng(q.seed, tg, c);
    PairMoments pm;
    const std::uint64_t begin = c * kChunkSize, end = std::min(N, begin + kChunkSize);
    double u[kMaxDim];
    for (std::uint64_t i = begin; i < end; ++i) {
      Vec x(n);
      for (int a = 0; a < n; ++a) x[a] = rng.uniform(box.lo[a], box.hi[a]);
      const int comp = static_cast<int>(i & 1u);
      const double r = bp.law.sample(stratified_u(i, N, rng.uniform()), comp);
      Vec w;
      if (bp.euclid) {
        w = euclid_sphere_point(n, rng);
      } else {
        const int face = static_cast<int>(rng.below(2 * n));
        for (int a = 0; a + 1 < n; ++a) u[a] = rng.uniform();
        w = sup_sphere_point(n, face, std::span<const double>(u, n > 1 ? n - 1 : 0));
      }
      const Vec y = x + r * w;
      double wl = 0.0, ws = 0.0;
      try {
        const Vec fx = d(x);
        if (include_lp) wl = bp.volume * value_norm_p(fx, p);
        if (box.contains(y)) ws = bp.factor(r) * value_dist_p(fx, d(y), p);
      } catch (const ExceptionalPoint&) {
        ++pm.skipped;
        wl = ws = 0.0;
      }
      pm.lp.add(wl);
      pm.semi.add(ws);
      pm.total.add(wl + ws);
    }
    return pm;
  });
  return reduce_pairs(parts);
}

// Deterministic product rule in the unit-cube coordinates of the pair sampler
// (sup kernel): X on a Gauss grid, radial quantile and face coordinates on Gauss
// grids, faces summed, both radial components averaged.
PairMoments box_pair_grid(const FieldMap& d, const Box& box, double s, double p, const QuadratureSpec& q,
                          bool include_lp, int k) {
  if (q.euclidean_kernel && box.dim() > 1) throw ConfigError("tensor-grid pairs support the sup kernel only");
  BoxPairs bp(box, s, p, q);
  const int n = box.dim();
  const int dims = 2 * n;  // X (n), radial quantile (1), face coordinates (n-1)
  const GaussRule g = gauss_legendre(k);
  std::vector<int> idx(dims, 0);
  double lp = 0.0, semi = 0.0;
  std::uint64_t skipped = 0;
  std::vector<double> lp_terms, semi_terms;
  for (;;) {
    double wgt = 1.0;
    double uu[2 * kMaxDim];
    for (int a = 0; a < dims; ++a) {
      uu[a] = 0.5 * (g.nodes[idx[a]] + 1.0);
      wgt *= 0.5 * g.weights[idx[a]];
    }
    Vec x(n);
    for (int a = 0; a < n; ++a) x[a] = box.lo[a] + uu[a] * (box.hi[a] - box.lo[a]);
    try {
      const Vec fx = d(x);
      if (include_lp) lp_terms.push_back(wgt * bp.volume * value_norm_p(fx, p));
      double acc = 0.0;
      for (int comp = 0; comp < 2; ++comp) {
        const double r = bp.law.sample(uu[n], comp);
        for (int face = 0; face < 2 * n; ++face) {
          const Vec y = x + r * sup_sphere_point(n, face, std::span<const double>(uu + n + 1, n - 1));
          if (!box.contains(y)) continue;
          acc += 0.5 / (2.0 * n) * bp.factor(r) * value_dist_p(fx, d(y), p);
        }
      }
      semi_terms.push_back(wgt * acc);
    } catch (const ExceptionalPoint&) {
      ++skipped;
    }
    int a = dims - 1;
    for (; a >= 0; --a) {
      if (++idx[a] < k) break;
      idx[a] = 0;
    }
    if (a < 0) break;
  }
  lp = pairwise_sum(lp_terms);
  semi = pairwise_sum(semi_terms);
  PairMoments pm;
  // A single "sample" carrying the rule value; the refinement delta is attached by the caller.
  pm.lp.add(lp);
  pm.semi.add(semi);
  pm.total.add(lp + semi);
  pm.skipped = skipped;
  return pm;
}

int grid_order(std::uint64_t samples, int dims) {
  return std::max(2, static_cast<int>(std::lround(std::pow(static_cast<double>(samples), 1.0 / dims))));
}

NormReport pair_report(const std::string& op, const FieldMap& d, const Box& box, double s, double p,
                       const QuadratureSpec& q, bool include_lp) {
  SobolevParams sp{s, p, -1};
  sp.validate_fractional();
  q.validate();
  if (d.in_dim() != box.dim()) throw PreconditionError(op + ": field and box dimensions differ");
  NormReport rep{op, 0.0, 0.0, sp, q};
  if (q.method == QuadMethod::MonteCarloPairs) {
    const PairMoments pm = box_pair_mc(d, box, s, p, q, op, include_lp);
    rep.value = pm.total.mean();
    rep.std_error = pm.total.std_error();
    rep.skipped = pm.skipped;
    if (include_lp) {
      rep.extra["lp_part"] = pm.lp.mean();
      rep.extra["seminorm_part"] = pm.semi.mean();
    }
  } else {
    const int k = grid_order(q.samples, 2 * box.dim());
    const PairMoments fine = box_pair_grid(d, box, s, p, q, include_lp, k);
    const PairMoments coarse = box_pair_grid(d, box, s, p, q, include_lp, std::max(2, k / 2));
    rep.value = fine.total.sum;
    rep.std_error = std::abs(fine.total.sum - coarse.total.sum);
    rep.skipped = fine.skipped;
    rep.extra["grid_order"] = k;
    if (include_lp) {
      rep.extra["lp_part"] = fine.lp.sum;
      rep.extra["seminorm_part"] = fine.semi.sum;
    }
  }
  rep.value = std::max(rep.value, 0.0);
  if (q.refinement_check) {
    const double diam = q.euclidean_kernel ? euclid_norm(box.hi - box.lo) : box.diameter();
    QuadratureSpec base = q;
    base.refinement_check = false;
    const double delta = std::max(q.diagonal_cutoff, 1e-2 * diam);
    const RefinementCheck rc = refine_cutoff(
        [&](double cut) {
          QuadratureSpec qq = base;
          qq.diagonal_cutoff = cut;
          return pair_report(op, d, box, s, p, qq, include_lp);
        },
        delta);
    rep.divergent = rc.divergent;
    rep.extra["refinement"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rc.cutoffs.size(); ++i)
      rep.extra["refinement"].push_back({{"cutoff", rc.cutoffs[i]}, {"value", rc.reports[i].value},
                                         {"std_error", rc.reports[i].std_error}});
  }
  return rep;
}

}  // namespace

RefinementCheck refine_cutoff(const std::function<NormReport(double)>& estimate, double delta) {
  RefinementCheck rc;
  for (int k = 0; k < 3; ++k) {
    rc.cutoffs.push_back(delta / std::pow(4.0, k));
    rc.reports.push_back(estimate(rc.cutoffs.back()));
  }
  const auto& r = rc.reports;
  const double inc1 = r[1].value - r[0].value, inc2 = r[2].value - r[1].value;
  const double noise = 3.0 * std::hypot(r[2].std_error, r[1].std_error);
  const double floor = 1e-9 * std::abs(r[2].value) + 1e-300;
  rc.divergent = inc2 > noise && inc2 > floor && inc2 > 0.9 * inc1;
  return rc;
}

// ---------------------------------------------------------------------------
// box norms

NormReport lp_norm(const FieldMap& f, const Box& box, double p, const QuadratureSpec& quad, const RegionMask& mask) {
  quad.validate();
  if (!(p >= 1.0)) throw ConfigError("p must be >= 1");
  if (f.in_dim() != box.dim()) throw PreconditionError("lp_norm: field and box dimensions differ");
  const double vol = box.volume();
  const int n = box.dim();
  auto integrand = [&](const Vec& x) {
    if (mask && !mask(x)) return 0.0;
    return vol * value_norm_p(f(x), p);
  };
  NormReport rep{"lp_norm", 0.0, 0.0, SobolevParams{1.0, p, -1}, quad};
  double mean = 0.0, se = 0.0;
  if (quad.method == QuadMethod::MonteCarloPairs) {
    const McResult r = monte_carlo(quad.samples, quad.seed, "lp_norm", [&](Rng& rng, std::uint64_t) {
      Vec x(n);
      for (int a = 0; a < n; ++a) x[a] = rng.uniform(box.lo[a], box.hi[a]);
      try {
        return integrand(x);
      } catch (const ExceptionalPoint&) {
        return std::nan("");
      }
    });
    mean = r.moments.mean();
    se = r.moments.std_error();
    rep.skipped = r.skipped;
  } else {
    auto rule = [&](int k) {
      const GaussRule g = gauss_legendre(k);
      std::vector<int> idx(n, 0);
      std::vector<double> terms;
      for (;;) {
        double w = 1.0;
        Vec x(n);
        for (int a = 0; a < n; ++a) {
          x[a] = box.lo[a] + 0.5 * (g.nodes[idx[a]] + 1.0) * (box.hi[a] - box.lo[a]);
          w *= 0.5 * g.weights[idx[a]];
        }
        try {
          terms.push_back(w * integrand(x));
        } catch (const ExceptionalPoint&) {
          ++rep.skipped;
        }
        int a = n - 1;
        for (; a >= 0; --a) {
          if (++idx[a] < k) break;
          idx[a] = 0;
        }
        if (a < 0) break;
      }
      return pairwise_sum(terms);
    };
    const int k = grid_order(quad.samples, n);
    mean = rule(k);
    se = std::abs(mean - rule(std::max(1, k / 2)));
    rep.extra["grid_order"] = k;
  }
  rep.value = std::pow(std::max(mean, 0.0), 1.0 / p);
  rep.std_error = mean > 0.0 ? se * std::pow(mean, 1.0 / p - 1.0) / p : se;
  rep.extra["p_power"] = mean;
  return rep;
}

NormReport gagliardo_seminorm_p(const FieldMap& f, const Box& box, double s, double p, const QuadratureSpec& quad) {
  return pair_report("gagliardo_seminorm_p", f, box, s, p, quad, false);
}

NormReport wsp_distance(const FieldMap& f, const FieldMap& g, const Box& box, double s, double p,
                        const QuadratureSpec& quad) {
  return pair_report("wsp_distance", difference(f, g), box, s, p, quad, true);
}

NormReport w1r_seminorm(const FieldMap& f, const Box& box, double r, const QuadratureSpec& quad,
                        const RegionMask& mask, const W1rOptions& opts) {
  quad.validate();
  if (!(r >= 1.0)) throw ConfigError("w1r: r must be >= 1");
  const int n = box.dim();
  auto integrand = [&](const Vec& x, double eta) {
    if (mask && !mask(x)) return 0.0;
    if (opts.singular_distance && opts.singular_distance(x) < eta) return 0.0;
    try {
      const double g = f.jacobian(x).frobenius();
      return r == 1.0 ? g : std::pow(g, r);
    } catch (const ExceptionalPoint&) {
      return 0.0;
    } catch (const SingularPoint&) {
      return 0.0;
    }
  };
  auto estimate = [&](double eta) {
    NormReport rep{"w1r_seminorm", 0.0, 0.0, SobolevParams{1.0, r, -1}, quad};
    if (quad.method == QuadMethod::TensorGrid) {
      const CubatureResult c = adaptive_cubature(
          [&](std::span<const double> u) { return integrand(Vec(u), eta); }, box.lo.span(), box.hi.span(),
          opts.cubature);
      rep.value = c.value;
      rep.std_error = c.error;
      rep.extra["evals"] = c.evals;
      rep.extra["converged"] = c.converged;
    } else {
      const double vol = box.volume();
      const McResult m = monte_carlo(quad.samples, quad.seed, "w1r", [&](Rng& rng, std::uint64_t) {
        Vec x(n);
        for (int a = 0; a < n; ++a) x[a] = rng.uniform(box.lo[a], box.hi[a]);
        return vol * integrand(x, eta);
      });
      rep.value = m.moments.mean();
      rep.std_error = m.moments.std_error();
    }
    return rep;
  };
  if (!opts.singular_distance) return estimate(0.0);
  const RefinementCheck rc = refine_cutoff(estimate, opts.eta0);
  NormReport rep = rc.reports.back();
  rep.divergent = rc.divergent;
  rep.extra["refinement"] = nlohmann::json::array();
  for (std::size_t i = 0; i < rc.cutoffs.size(); ++i)
    rep.extra["refinement"].push_back({{"cutoff", rc.cutoffs[i]}, {"value", rc.reports[i].value}});
  return rep;
}

// ---------------------------------------------------------------------------
// skeleton index

namespace {

std::string face_key(const IVec& code) {
  return std::string(reinterpret_cast<const char*>(code.begin()), code.size() * sizeof(std::int64_t));
}

double closure_gap(const Face& a, const Face& b, double eps) {
  double g = 0.0;
  for (int i = 0; i < a.code.size(); ++i) {
    const double ca = eps * static_cast<double>(a.code[i]), cb = eps * static_cast<double>(b.code[i]);
    const double ra = a.is_free(i) ? eps : 0.0, rb = b.is_free(i) ? eps : 0.0;
    g = std::max(g, std::abs(ca - cb) - ra - rb);
  }
  return std::max(g, 0.0);
}

}  // namespace

SkeletonIndex::SkeletonIndex(std::shared_ptr<const MeshSpec> mesh, int level, double near_radius)
    : mesh_(std::move(mesh)), level_(level) {
  faces_ = enumerate_skeleton_faces(*mesh_, level);
  for (std::size_t i = 0; i < faces_.size(); ++i) lookup_.emplace(face_key(faces_[i].code), i);
  near_.resize(faces_.size());
  if (!(near_radius > 0.0)) return;
  const int n = mesh_->dim;
  const double eps = mesh_->half_width;
  const int K = static_cast<int>(std::ceil(near_radius / eps)) + 2;
  int span = 2 * K + 1, total = 1;
  for (int i = 0; i < n; ++i) total *= span;
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    for (int t = 0; t < total; ++t) {
      IVec code = faces_[f].code;
      int rest = t;
      for (int i = 0; i < n; ++i) {
        code[i] += rest % span - K;
        rest /= span;
      }
      const auto it = lookup_.find(face_key(code));
      if (it == lookup_.end()) continue;
      if (closure_gap(faces_[f], faces_[it->second], eps) <= near_radius * (1.0 + 1e-12))
        near_[f].push_back(static_cast<std::uint32_t>(it->second));
    }
    std::sort(near_[f].begin(), near_[f].end());
  }
}

double SkeletonIndex::measure() const {
  return static_cast<double>(faces_.size()) * std::pow(2.0 * mesh_->half_width, level_);
}

std::optional<std::size_t> SkeletonIndex::find(const Face& f) const {
  const auto it = lookup_.find(face_key(f.code));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

SkeletonPoint SkeletonIndex::point_on_face(std::size_t i, std::span<const double> u) const {
  const Face& face = faces_[i];
  const MeshSpec& m = *mesh_;
  Vec x = face.center(m);
  int k = 0;
  for (int a = 0; a < m.dim; ++a)
    if (face.is_free(a)) x[a] += m.half_width * (2.0 * u[k++] - 1.0);
  return skeleton_point_on_face(face, m, x);
}

SkeletonPoint SkeletonIndex::uniform_point(Rng& rng) const {
  double u[kMaxDim];
  const std::size_t f = rng.below(faces_.size());
  for (int a = 0; a < level_; ++a) u[a] = rng.uniform();
  return point_on_face(f, std::span<const double>(u, level_));
}

// ---------------------------------------------------------------------------
// skeleton norms

namespace {

void check_level(const SkeletonMap& g, int level, const char* op) {
  if (level < 1) throw PreconditionError(std::string(op) + ": skeleton norms need level >= 1");
  if (level > g.level()) throw PreconditionError(std::string(op) + ": map is defined on a lower skeleton");
}

SkeletonMap skeleton_difference(const SkeletonMap& a, const SkeletonMap& b) {
  if (a.out_dim() != b.out_dim()) throw PreconditionError("skeleton difference: shape mismatch");
  return SkeletonMap(a.mesh_ptr(), std::min(a.level(), b.level()), a.out_dim(),
                     [a, b](const SkeletonPoint& pt) { return a(pt) - b(pt); });
}

PairMoments skeleton_pair_mc(const SkeletonMap& g, int level, double s, double p, const QuadratureSpec& q,
                             bool within_two_eps, double exponent, bool include_lp, std::string_view tag) {
  const MeshSpec& mesh = g.mesh();
  const double eps = mesh.half_width;
  const SkeletonIndex index(g.mesh_ptr(), level, 2.0 * eps);
  if (index.faces().empty()) throw PreconditionError("skeleton estimator: no faces inside the bounds");
  if (q.diagonal_cutoff >= 2.0 * eps) throw ConfigError("diagonal cutoff exceeds the face size");
  const RadialLaw law = RadialLaw::for_kernel(s, p, q.diagonal_cutoff, 2.0 * eps);
  const double M = index.measure();
  const double area = sup_sphere_area(level);
  const double nf = static_cast<double>(index.faces().size());
  const double far_share = within_two_eps ? 0.0 : 0.5;
  const std::uint64_t N = q.samples;
  const std::uint64_t chunks = (N + kChunkSize - 1) / kChunkSize;
  const std::string tg(tag);
  auto parts = run_chunks<PairMoments>(chunks, [&](std::size_t c) {
    Rng rng(q.seed, tg, c);
    PairMoments pm;
    const std::uint64_t begin = c * kChunkSize, end = std::min(N, begin + kChunkSize);
    double u[kMaxDim];
    for (std::uint64_t i = begin; i < end; ++i) {
      const std::size_t f1 = rng.below(index.faces().size());
      for (int a = 0; a < level; ++a) u[a] = rng.uniform();
      const SkeletonPoint px = index.point_on_face(f1, std::span<const double>(u, level));
      const Vec x = px.ambient(mesh);
      const auto& near = index.near(f1);
      std::size_t f2;
      if (rng.uniform() < far_share)
        f2 = rng.below(index.faces().size());
      else
        f2 = near[rng.below(near.size())];
      const bool is_near = std::binary_search(near.begin(), near.end(), static_cast<std::uint32_t>(f2));
      const Face& face2 = index.faces()[f2];
      const Vec c2 = face2.center(mesh);
      // Clamp X onto the closure of face 2 and step radially inside its plane.
      Vec z = c2;
      for (int a = 0; a < mesh.dim; ++a)
        if (face2.is_free(a)) z[a] = std::clamp(x[a], c2[a] - eps, c2[a] + eps);
      const int comp = static_cast<int>(i & 1u);
      const double r = law.sample(stratified_u(i, N, rng.uniform()), comp);
      const int sf = static_cast<int>(rng.below(2 * level));
      for (int a = 0; a + 1 < level; ++a) u[a] = rng.uniform();
      const Vec w = sup_sphere_point(level, sf, std::span<const double>(u, level - 1));
      Vec y = z;
      bool inside = true;
      int k = 0;
      for (int a = 0; a < mesh.dim; ++a) {
        if (!face2.is_free(a)) continue;
        y[a] = z[a] + r * w[k++];
        inside = inside && std::abs(y[a] - c2[a]) <= eps;
      }
      double wl = 0.0, ws = 0.0;
      try {
        const Vec gx = g(px);
        if (include_lp) wl = M * value_norm_p(gx, p);
        const double dist = sup_dist(x, y);
        if (inside && dist > 0.0 && (!within_two_eps || dist < 2.0 * eps)) {
          const double face_prob = (1.0 - far_share) * (is_near ? 1.0 / static_cast<double>(near.size()) : 0.0) +
                                   far_share / nf;
          const double density = face_prob * law.density(r) / (area * std::pow(r, level - 1));
          const Vec gy = g(skeleton_point_on_face(face2, mesh, y));
          ws = M * value_dist_p(gx, gy, p) / std::pow(dist, exponent) / density;
        }
      } catch (const ExceptionalPoint&) {
        ++pm.skipped;
        wl = ws = 0.0;
      }
      pm.lp.add(wl);
      pm.semi.add(ws);
      pm.total.add(wl + ws);
    }
    return pm;
  });
  return reduce_pairs(parts);
}

NormReport skeleton_pair_report(const std::string& op, const SkeletonMap& g, int level, double s, double p,
                                const QuadratureSpec& q, bool within_two_eps, double exponent, bool include_lp) {
  check_level(g, level, op.c_str());
  SobolevParams sp{s, p, level};
  sp.validate_fractional();
  q.validate();
  if (exponent < 0.0) exponent = level + s * p;
  auto once = [&](const QuadratureSpec& qq) {
    const PairMoments pm = skeleton_pair_mc(g, level, s, p, qq, within_two_eps, exponent, include_lp, op);
    NormReport rep{op, pm.total.mean(), pm.total.std_error(), sp, qq};
    rep.skipped = pm.skipped;
    rep.extra["kernel_exponent"] = exponent;
    rep.extra["within_two_eps"] = within_two_eps;
    if (include_lp) {
      rep.extra["lp_part"] = pm.lp.mean();
      rep.extra["seminorm_part"] = pm.semi.mean();
    }
    return rep;
  };
  NormReport rep = once(q);
  if (q.refinement_check) {
    QuadratureSpec base = q;
    base.refinement_check = false;
    const double delta = std::max(q.diagonal_cutoff, 1e-2 * 2.0 * g.mesh().half_width);
    const RefinementCheck rc = refine_cutoff(
        [&](double cut) {
          QuadratureSpec qq = base;
          qq.diagonal_cutoff = cut;
          return once(qq);
        },
        delta);
    rep.divergent = rc.divergent;
    rep.extra["refinement"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rc.cutoffs.size(); ++i)
      rep.extra["refinement"].push_back({{"cutoff", rc.cutoffs[i]}, {"value", rc.reports[i].value},
                                         {"std_error", rc.reports[i].std_error}});
  }
  return rep;
}

}  // namespace

NormReport skeleton_lp(const SkeletonMap& g, int level, double p, const QuadratureSpec& quad) {
  check_level(g, level, "skeleton_lp");
  quad.validate();
  const SkeletonIndex index(g.mesh_ptr(), level, 0.0);
  if (index.faces().empty()) throw PreconditionError("skeleton_lp: no faces inside the bounds");
  const double M = index.measure();
  const McResult r = monte_carlo(quad.samples, quad.seed, "skeleton_lp", [&](Rng& rng, std::uint64_t) {
    try {
      return M * value_norm_p(g(index.uniform_point(rng)), p);
    } catch (const ExceptionalPoint&) {
      return std::nan("");
    }
  });
  NormReport rep{"skeleton_lp_p", r.moments.mean(), r.moments.std_error(), SobolevParams{1.0, p, level}, quad};
  rep.skipped = r.skipped;
  return rep;
}

NormReport skeleton_gagliardo_p(const SkeletonMap& g, int level, double s, double p, const QuadratureSpec& quad,
                                bool within_two_eps, double kernel_exponent) {
  return skeleton_pair_report("skeleton_gagliardo_p", g, level, s, p, quad, within_two_eps, kernel_exponent, false);
}

NormReport skeleton_wsp_distance(const SkeletonMap& g1, const SkeletonMap& g2, int level, double s, double p,
                                 const QuadratureSpec& quad) {
  return skeleton_pair_report("skeleton_wsp_distance", skeleton_difference(g1, g2), level, s, p, quad, false, -1.0,
                              true);
}

NormReport cross_term(const SkeletonMap& g, int level, double s, double p, const QuadratureSpec& quad) {
  check_level(g, level, "cross_term");
  SobolevParams sp{s, p, level};
  sp.validate_fractional();
  quad.validate();
  const MeshSpec& mesh = g.mesh();
  const double eps = mesh.half_width;
  const SkeletonIndex index(g.mesh_ptr(), level, 0.0);
  if (index.faces().empty()) throw PreconditionError("cross_term: no faces inside the bounds");
  const double nf = static_cast<double>(index.faces().size());
  const double area = sup_sphere_area(level);
  const double gamma = std::max(1.0 - s * p, 0.05);
  auto once = [&](const QuadratureSpec& q) {
    // Normalized face radius r in (0, rmax] with 1 - r >= cutoff / eps.
    const double vmin = q.diagonal_cutoff / eps;
    if (vmin >= 1.0) throw ConfigError("cross_term: cutoff exceeds eps");
    const double rmax = 1.0 - vmin;
    const double l = level;
    auto density = [&](double r) {
      const double d0 = l * std::pow(r, l - 1.0) / std::pow(rmax, l);
      const double v = 1.0 - r;
      const double d1 = gamma * std::pow(v, gamma - 1.0) / (1.0 - std::pow(vmin, gamma));
      return 0.5 * d0 + 0.5 * d1;
    };
    const std::uint64_t N = q.samples;
    const McResult m = monte_carlo(N, q.seed, "cross_term", [&](Rng& rng, std::uint64_t i) {
      const double uu = stratified_u(i, N, rng.uniform());
      double r;
      if (i & 1u) {
        const double a = std::pow(vmin, gamma);
        r = 1.0 - std::pow(a + uu * (1.0 - a), 1.0 / gamma);
      } else {
        r = rmax * std::pow(uu, 1.0 / l);
      }
      if (!(r > 0.0)) return 0.0;
      const std::size_t f = rng.below(index.faces().size());
      double u[kMaxDim];
      const int sf = static_cast<int>(rng.below(2 * level));
      for (int a = 0; a + 1 < level; ++a) u[a] = rng.uniform();
      const Vec w = sup_sphere_point(level, sf, std::span<const double>(u, level - 1));
      const Face& face = index.faces()[f];
      Vec x = face.center(mesh);
      int k = 0;
      for (int a = 0; a < mesh.dim; ++a)
        if (face.is_free(a)) x[a] += eps * r * w[k++];
      try {
        const SkeletonPoint pt = skeleton_point_on_face(face, mesh, x);
        const SkeletonPoint low = project_step(pt, eps);
        const double dist = eps * (1.0 - r);
        const double jac = nf * std::pow(eps, l) * area * std::pow(r, l - 1.0);
        return jac / density(r) * value_dist_p(g(pt), g(low), p) / std::pow(dist, s * p);
      } catch (const ExceptionalPoint&) {
        return std::nan("");
      }
    });
    NormReport rep{"cross_term", m.moments.mean(), m.moments.std_error(), sp, q};
    rep.skipped = m.skipped;
    return rep;
  };
  NormReport rep = once(quad);
  if (quad.refinement_check) {
    QuadratureSpec base = quad;
    base.refinement_check = false;
    const RefinementCheck rc = refine_cutoff(
        [&](double cut) {
          QuadratureSpec qq = base;
          qq.diagonal_cutoff = cut;
          return once(qq);
        },
        std::max(quad.diagonal_cutoff, 1e-2 * eps));
    rep.divergent = rc.divergent;
    rep.extra["refinement"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rc.cutoffs.size(); ++i)
      rep.extra["refinement"].push_back({{"cutoff", rc.cutoffs[i]}, {"value", rc.reports[i].value},
                                         {"std_error", rc.reports[i].std_error}});
  }
  return rep;
}

nlohmann::json MembershipReport::to_json() const {
  nlohmann::json out{{"member", member}, {"levels", nlohmann::json::array()}};
  for (std::size_t i = 0; i < level_norms.size(); ++i)
    out["levels"].push_back({{"level", i + 1}, {"norm_p", level_norms[i].to_json()},
                             {"cross_term", cross_terms[i].to_json()}});
  return out;
}

MembershipReport wspj_membership(const SkeletonMap& g, int j, double s, double p, const QuadratureSpec& quad) {
  if (j < 1) throw PreconditionError("wspj_membership: need j >= 1");
  QuadratureSpec q = quad;
  q.refinement_check = true;
  MembershipReport rep;
  for (int l = 1; l <= j; ++l) {
    QuadratureSpec ql = q;
    ql.seed = substream_seed(quad.seed, "membership", static_cast<std::uint64_t>(l));
    const NormReport lp = skeleton_lp(g, l, p, ql);
    NormReport semi = skeleton_gagliardo_p(g, l, s, p, ql);
    semi.op = "skeleton_norm_p";
    semi.extra["lp_part"] = lp.value;
    semi.extra["seminorm_part"] = semi.value;
    semi.value += lp.value;
    semi.std_error = std::hypot(semi.std_error, lp.std_error);
    const NormReport cross = cross_term(g, l, s, p, ql);
    rep.member = rep.member && !semi.divergent && !cross.divergent && std::isfinite(semi.value) &&
                 std::isfinite(cross.value);
    rep.level_norms.push_back(semi);
    rep.cross_terms.push_back(cross);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// kernel bound

CubatureResult kernel_k(const Vec& omega, const Sector& so, const Vec& lambda, const Sector& sl, int j, double s,
                        double p, const CubatureOptions& opts) {
  const int n = omega.size();
  const int m = n - j;
  if (j < 0 || j >= n || so.sigma.size() != m || sl.sigma.size() != m)
    throw PreconditionError("kernel_k: sectors must have n - j entries");
  if (!(s * p < j + 1)) throw PreconditionError("kernel_k: needs sp < j + 1");
  const double expo = n + s * p;
  std::uint32_t po = 0, pl = 0;
  for (int k = 0; k < m; ++k) {
    po |= 1u << so.sigma[k];
    pl |= 1u << sl.sigma[k];
  }
  auto embed = [&](std::span<const double> t, const Vec& w, const Sector& sec, std::uint32_t pinned, Vec& x,
                   double& jac) {
    double prod = 1.0;
    jac = 1.0;
    for (int i = 0; i < m; ++i) {
      prod *= t[i];
      x[sec.sigma[i]] = static_cast<double>(sec.q[i]) * prod;
      jac *= std::pow(t[i], n - 1 - i);
    }
    for (int l = 0; l < n; ++l)
      if (!((pinned >> l) & 1u)) x[l] = prod * w[l];
  };
  // The fibers of omega and lambda may share a segment through the cube center,
  // which makes {t_i = u_i} part of the singular set. Each (t_i, u_i) square is cut
  // along its diagonal and mapped back by a Duffy transform (t = a, u = a b or the
  // mirror), which moves the diagonal to b = 1; a smootherstep grading in every
  // coordinate then flattens the boundary singularities for the bisection rule.
  const auto grade = [](double v, double& dv) {
    dv = 30.0 * v * v * (1.0 - v) * (1.0 - v);
    return v * v * v * (10.0 - 15.0 * v + 6.0 * v * v);
  };
  const std::vector<double> lo(2 * m, 0.0), hi(2 * m, 1.0);
  CubatureOptions piece = opts;
  piece.max_evals = std::max<std::size_t>(opts.max_evals >> m, 2000);
  CubatureResult total;
  total.converged = true;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    const CubatureResult r = adaptive_cubature(
        [&](std::span<const double> ab) {
          double t[kMaxDim], u[kMaxDim];
          double w = 1.0;
          for (int i = 0; i < m; ++i) {
            double da, db;
            const double a = grade(ab[i], da), b = grade(ab[m + i], db);
            w *= a * da * db;
            if ((mask >> i) & 1u) {
              t[i] = a;
              u[i] = a * b;
            } else {
              t[i] = a * b;
              u[i] = a;
            }
          }
          if (w == 0.0) return 0.0;
          Vec x(n), y(n);
          double jx, jy;
          embed(std::span<const double>(t, m), omega, so, po, x, jx);
          embed(std::span<const double>(u, m), lambda, sl, pl, y, jy);
          const double d = sup_dist(x, y);
          if (d < 1e-60) return 0.0;  // null set; avoids overflow of d^-expo
          return w * jx * jy / std::pow(d, expo);
        },
        lo, hi, piece);
    total.value += r.value;
    total.error += r.error;
    total.evals += r.evals;
    total.converged = total.converged && r.converged;
  }
  return total;
}

nlohmann::json KernelReport::to_json(bool with_rows) const {
  nlohmann::json out{{"n", n},
                     {"j", j},
                     {"s", s},
                     {"p", p},
                     {"pairs", pairs},
                     {"skipped", skipped},
                     {"max_ratio", max_ratio},
                     {"max_ratio_refined", max_ratio_refined},
                     {"relative_change", relative_change},
                     {"bounded", bounded}};
  if (with_rows) {
    out["rows"] = nlohmann::json::array();
    for (const auto& r : rows)
      out["rows"].push_back({{"omega", r.omega.to_vector()},
                             {"lambda", r.lambda.to_vector()},
                             {"distance", r.distance},
                             {"k", r.k},
                             {"ratio", r.ratio},
                             {"ratio_refined", r.ratio_refined},
                             {"converged", r.converged}});
  }
  return out;
}

namespace {

std::pair<Vec, Sector> random_skeleton_point(int n, int j, Rng& rng) {
  const int m = n - j;
  std::array<int, kMaxDim> axes{};
  std::iota(axes.begin(), axes.begin() + n, 0);
  for (int i = n - 1; i > 0; --i) std::swap(axes[i], axes[rng.below(i + 1)]);
  Sector sec{IVec(m), IVec(m)};
  Vec w(n);
  std::uint32_t pinned = 0;
  for (int k = 0; k < m; ++k) {
    sec.sigma[k] = axes[k];
    sec.q[k] = rng.uniform() < 0.5 ? -1 : 1;
    w[axes[k]] = static_cast<double>(sec.q[k]);
    pinned |= 1u << axes[k];
  }
  for (int l = 0; l < n; ++l)
    if (!((pinned >> l) & 1u)) w[l] = rng.uniform(-1.0, 1.0);
  return {w, sec};
}

}  // namespace

KernelReport verify_kernel_bound(int n, int j, double s, double p, const KernelCheckOptions& opts) {
  if (!(s > 0.0 && s < 1.0)) throw ConfigError("kernel check needs 0 < s < 1");
  if (!(s * p < j + 1)) throw ConfigError("kernel check needs sp < j + 1");
  if (j < 0 || j >= n) throw ConfigError("kernel check needs 0 <= j < n");
  KernelReport rep;
  rep.n = n;
  rep.j = j;
  rep.s = s;
  rep.p = p;
  rep.pairs = opts.pairs;
  CubatureOptions fine = opts.coarse;
  fine.rel_tol /= 4.0;
  fine.abs_tol /= 4.0;
  fine.max_evals *= 4;
  struct Draw {
    Vec w, l;
    Sector sw, sl;
    bool skip;
  };
  std::vector<Draw> draws;
  Rng rng(opts.seed, "kernel-pairs", static_cast<std::uint64_t>(n * 16 + j));
  for (std::size_t i = 0; i < opts.pairs; ++i) {
    auto [w, sw] = random_skeleton_point(n, j, rng);
    auto [l, sl] = random_skeleton_point(n, j, rng);
    if (opts.equal_every > 0 && i % opts.equal_every == opts.equal_every - 1) {
      l = w;
      sl = sw;
    }
    draws.push_back({w, l, sw, sl, w == l});
  }
  const auto rows = run_chunks<std::optional<KernelRow>>(draws.size(), [&](std::size_t i) {
    const Draw& d = draws[i];
    if (d.skip) return std::optional<KernelRow>{};
    KernelRow row;
    row.omega = d.w;
    row.lambda = d.l;
    row.distance = sup_dist(d.w, d.l);
    const double scale = std::pow(row.distance, j + s * p);
    const CubatureResult c = kernel_k(d.w, d.sw, d.l, d.sl, j, s, p, opts.coarse);
    const CubatureResult cf = kernel_k(d.w, d.sw, d.l, d.sl, j, s, p, fine);
    row.k = cf.value;
    row.ratio = c.value * scale;
    row.ratio_refined = cf.value * scale;
    row.converged = c.converged && cf.converged;
    return std::optional<KernelRow>(row);
  });
  for (const auto& r : rows) {
    if (!r) {
      ++rep.skipped;
      continue;
    }
    rep.max_ratio = std::max(rep.max_ratio, r->ratio);
    rep.max_ratio_refined = std::max(rep.max_ratio_refined, r->ratio_refined);
    rep.rows.push_back(*r);
  }
  rep.relative_change =
      rep.max_ratio_refined > 0.0 ? std::abs(rep.max_ratio_refined - rep.max_ratio) / rep.max_ratio_refined : 0.0;
  rep.bounded = std::isfinite(rep.max_ratio_refined) && rep.relative_change < opts.stability_tol;
  return rep;
}

}  // namespace fracsob
