#include "fracsob/pipeline.hpp"

#include <cmath>
#include <functional>

#include "fracsob/errors.hpp"
#include "fracsob/rng.hpp"

namespace fracsob {

void CutoffProfile::validate() const {
  if (!(plateau_inner > 0.0 && plateau_inner < support_outer && support_outer < 1.0))
    throw PreconditionError("cutoff profile needs 0 < plateau < support < 1");
}

double CutoffProfile::operator()(double r) const {
  if (r <= plateau_inner) return 1.0;
  if (r >= support_outer) return 0.0;
  const double x = (r - plateau_inner) / (support_outer - plateau_inner);
  return 1.0 - x * x * (3.0 - 2.0 * x);
}

double MollifierSpec::bump(double x) {
  static const double norm = [] {
    CubatureOptions o{1e-13, 0.0, 200'000};
    const double lo[1] = {-1.0}, hi[1] = {1.0};
    return adaptive_cubature(
               [](std::span<const double> u) { return std::exp(-1.0 / (1.0 - u[0] * u[0])); }, lo, hi, o)
        .value;
  }();
  if (std::abs(x) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - x * x)) / norm;
}

MollifierSpec::MollifierSpec(double t_, int nodes_) : t(t_), nodes(nodes_) {
  validate();
  const GaussRule g = gauss_legendre(nodes);
  double total = 0.0;
  for (int i = 0; i < nodes; ++i) {
    z_.push_back(g.nodes[i]);
    w_.push_back(g.weights[i] * bump(g.nodes[i]));
    total += w_.back();
  }
  for (double& w : w_) w /= total;
}

void MollifierSpec::validate() const {
  if (!(t > 0.0 && t < 1.0)) throw PreconditionError("mollifier scale t must lie in (0, 1)");
  if (nodes < 2) throw PreconditionError("mollifier rule needs at least 2 nodes");
}

double face_radius(const SkeletonPoint& pt, double eps) {
  double r = 0.0;
  for (int i = 0; i < pt.local.size(); ++i)
    if (!pt.is_pinned(i)) r = std::max(r, std::abs(pt.local[i]));
  return r / eps;
}

SkeletonMap fill_hole(const SkeletonMap& g, double mu) {
  if (!(mu > 0.0 && mu < 0.5)) throw PreconditionError("fill_hole needs 0 < mu < 1/2");
  if (g.level() < 1) throw PreconditionError("fill_hole needs a map on a skeleton of dimension >= 1");
  const int j = g.level();
  const double eps = g.mesh().half_width;
  return SkeletonMap(g.mesh_ptr(), j, g.out_dim(), [g, mu, j, eps](const SkeletonPoint& pt) {
    if (pt.dim < j) return g(pt);
    const double r = face_radius(pt, eps);
    if (r >= 1.0 - mu) return g(project_step(pt, eps));
    SkeletonPoint q = pt;
    for (int i = 0; i < q.local.size(); ++i)
      if (!q.is_pinned(i)) q.local[i] = pt.local[i] / (1.0 - mu);
    return g(q);
  });
}

Vec mollify_on_cube(const SkeletonMap& g, const MollifierSpec& spec, const SkeletonPoint& pt) {
  const double eps = g.mesh().half_width;
  const double r = face_radius(pt, eps);
  if (!(r + spec.t < 1.0)) throw WindowEscapes("mollifier window leaves the face");
  const int j = pt.dim;
  if (j < 1) throw PreconditionError("mollify_on_cube needs a point of a face of dimension >= 1");
  int axes[kMaxDim];
  int k = 0;
  for (int i = 0; i < pt.local.size(); ++i)
    if (!pt.is_pinned(i)) axes[k++] = i;
  const auto& z = spec.rule_nodes();
  const auto& w = spec.rule_weights();
  const int q = static_cast<int>(z.size());
  int idx[kMaxDim] = {};
  Vec acc(g.out_dim(), 0.0);
  for (;;) {
    SkeletonPoint y = pt;
    double wt = 1.0;
    for (int a = 0; a < j; ++a) {
      y.local[axes[a]] += eps * spec.t * z[idx[a]];
      wt *= w[idx[a]];
    }
    acc = acc + wt * g(y);
    int a = j - 1;
    for (; a >= 0; --a) {
      if (++idx[a] < q) break;
      idx[a] = 0;
    }
    if (a < 0) break;
  }
  return acc;
}

SkeletonMap blend_lipschitz(const SkeletonMap& g, const SkeletonMap& F, const MollifierSpec& spec,
                            const CutoffProfile& profile) {
  profile.validate();
  spec.validate();
  if (!(spec.t < 1.0 - profile.support_outer))
    throw PreconditionError("blend needs the mollifier scale below the cutoff collar (t < mu/3)");
  if (F.level() + 1 != g.level()) throw PreconditionError("blend: boundary map must live one level down");
  const int j = g.level();
  const double eps = g.mesh().half_width;
  return SkeletonMap(g.mesh_ptr(), j, g.out_dim(), [g, F, spec, profile, j, eps](const SkeletonPoint& pt) {
    if (pt.dim < j) return F(pt);
    const double r = face_radius(pt, eps);
    const double eta = profile(r);
    if (eta <= 0.0) return F(project_step(pt, eps));
    const Vec core = mollify_on_cube(g, spec, pt);
    if (eta >= 1.0) return core;
    return eta * core + (1.0 - eta) * F(project_step(pt, eps));
  });
}

SkeletonMap project_map(const SkeletonMap& G, const ManifoldTarget& target) {
  if (G.out_dim() != target.ambient_dim()) throw PreconditionError("project_map: target dimension mismatch");
  return SkeletonMap(G.mesh_ptr(), G.level(), G.out_dim(),
                     [G, target](const SkeletonPoint& pt) { return nearest_point_projection(G(pt), target); });
}

Schedule Schedule::defaults(int stages) {
  Schedule s;
  for (int k = 0; k < stages; ++k) {
    s.mu.push_back(std::ldexp(1.0, -k - 2));  // k counted from 1
    s.t.push_back(s.mu.back() / 4.0);
  }
  return s;
}

void Schedule::validate() const {
  if (mu.empty() || mu.size() != t.size()) throw ConfigError("schedule: mu and t must be non-empty and of equal length");
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (!(mu[k] > 0.0 && mu[k] < 0.5)) throw ConfigError("schedule: need 0 < mu < 1/2");
    if (!(t[k] > 0.0 && t[k] < mu[k] / 3.0)) throw ConfigError("schedule: need 0 < t < mu/3");
  }
}

nlohmann::json Schedule::to_json() const { return {{"mu", mu}, {"t", t}}; }

Schedule Schedule::from_json(const nlohmann::json& j) {
  if (j.contains("stages") && !j.contains("mu")) return defaults(j.at("stages").get<int>());
  Schedule s;
  s.mu = j.at("mu").get<std::vector<double>>();
  if (j.contains("t")) {
    s.t = j.at("t").get<std::vector<double>>();
  } else {
    for (double m : s.mu) s.t.push_back(m / 4.0);
  }
  s.validate();
  return s;
}

nlohmann::json LipschitzEstimate::to_json() const {
  return {{"constant", constant}, {"constant_half", constant_half}, {"pairs", pairs}, {"skipped", skipped}};
}

LipschitzEstimate lipschitz_estimate(const SkeletonMap& g, int level, std::size_t pairs, std::uint64_t seed) {
  const MeshSpec& mesh = g.mesh();
  const double eps = mesh.half_width;
  const SkeletonIndex index(g.mesh_ptr(), level, 2.0 * eps);
  if (index.faces().empty()) throw PreconditionError("lipschitz_estimate: no faces");
  LipschitzEstimate est;
  est.pairs = pairs;
  Rng rng(seed, "lipschitz", static_cast<std::uint64_t>(level));
  double u[kMaxDim];
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t f1 = rng.below(index.faces().size());
    for (int a = 0; a < level; ++a) u[a] = rng.uniform();
    const SkeletonPoint px = index.point_on_face(f1, std::span<const double>(u, level));
    const Vec x = px.ambient(mesh);
    SkeletonPoint py;
    if (i % 2 == 0) {
      const auto& near = index.near(f1);
      const Face& face2 = index.faces()[near[rng.below(near.size())]];
      const double r = 2.0 * eps * std::pow(1e-4, rng.uniform());
      const Vec c2 = face2.center(mesh);
      Vec y = c2;
      for (int a = 0; a < mesh.dim; ++a)
        if (face2.is_free(a)) y[a] = std::clamp(x[a] + r * rng.uniform(-1.0, 1.0), c2[a] - eps, c2[a] + eps);
      py = skeleton_point_on_face(face2, mesh, y);
    } else {
      py = index.uniform_point(rng);
    }
    const double d = sup_dist(x, py.ambient(mesh));
    if (!(d > 0.0)) {
      ++est.skipped;
      continue;
    }
    try {
      const double ratio = euclid_dist(g(px), g(py)) / d;
      est.constant = std::max(est.constant, ratio);
      if (i < pairs / 2) est.constant_half = std::max(est.constant_half, ratio);
    } catch (const ExceptionalPoint&) {
      ++est.skipped;
    }
  }
  return est;
}

nlohmann::json StageRecord::to_json() const {
  return {{"stage", stage},
          {"mu", mu},
          {"t", t},
          {"retries", retries},
          {"tube", {{"passed", tube.passed}, {"max_distance", tube.max_distance}, {"samples", tube.samples}}},
          {"lipschitz", lipschitz.to_json()},
          {"error", error.to_json()}};
}

nlohmann::json ApproximationResult::to_json() const {
  nlohmann::json out{{"stages", nlohmann::json::array()}};
  for (const auto& s : stages) out["stages"].push_back(s.to_json());
  if (membership) out["membership"] = membership->to_json();
  return out;
}

namespace {

SkeletonMap at_level(const SkeletonMap& g, int level) {
  return SkeletonMap(g.mesh_ptr(), level, g.out_dim(), [g](const SkeletonPoint& pt) { return g(pt); });
}

TubeCheck tube_check_on_level(const SkeletonMap& G, int level, const ManifoldTarget& target, std::size_t samples,
                              std::uint64_t seed) {
  const SkeletonIndex index(G.mesh_ptr(), level, 0.0);
  Rng rng(seed, "tube-level", static_cast<std::uint64_t>(level));
  // Stratify over faces so every face is visited.
  const std::size_t nf = index.faces().size();
  return uniform_tube_check(
      [&](std::size_t i) {
        double u[kMaxDim];
        for (int a = 0; a < level; ++a) u[a] = rng.uniform();
        return G(index.point_on_face(i % nf, std::span<const double>(u, level)));
      },
      std::max(samples, nf), target);
}

}  // namespace

ApproximationResult lipschitz_approximate(const SkeletonMap& g, const ManifoldTarget& target, double s, double p,
                                          const Schedule& schedule, const ApproximationOptions& opts) {
  const int j = g.level();
  const int n = g.mesh().dim;
  if (!(j >= 1 && j <= s * p + 1e-12 && s * p < n))
    throw PreconditionError("lipschitz_approximate needs 1 <= j <= sp < n");
  if (g.out_dim() != target.ambient_dim()) throw PreconditionError("lipschitz_approximate: target dimension mismatch");
  schedule.validate();
  ApproximationResult res;
  if (opts.require_membership) {
    res.membership = wspj_membership(g, j, s, p, opts.membership_quad);
    if (!res.membership->member)
      throw PreconditionError("skeleton map fails the W^{s,p}_j membership diagnostics (divergent level norm or cross term)");
  }
  const SkeletonMap vertices = at_level(g, 0);
  const std::uint64_t seed = opts.quad.seed;

  const bool adaptive = opts.stop_error > 0.0 && opts.compute_errors;
  const std::size_t given = schedule.mu.size();
  const std::size_t cap = adaptive ? std::max(static_cast<std::size_t>(std::max(opts.max_stages, 0)), given) : given;
  for (std::size_t k = 0; k < cap; ++k) {
    // Past the given schedule mu keeps halving.
    const double mu = k < given ? schedule.mu[k] : std::ldexp(schedule.mu.back(), -static_cast<int>(k + 1 - given));
    double t = k < schedule.t.size() ? schedule.t[k] : mu / 4.0;
    StageRecord rec;
    rec.stage = static_cast<int>(k);
    rec.mu = mu;
    for (;;) {
      try {
        TubeCheck top;
        std::function<SkeletonMap(int)> build = [&](int level) -> SkeletonMap {
          const SkeletonMap F = level == 1 ? vertices : build(level - 1);
          const SkeletonMap G = blend_lipschitz(fill_hole(at_level(g, level), mu), F, MollifierSpec(t),
                                                CutoffProfile::for_mu(mu));
          const TubeCheck tc = tube_check_on_level(G, level, target, opts.tube_samples,
                                                   substream_seed(seed, "tube", k));
          if (!tc.passed)
            throw TubeEscape("blended map leaves the tube at level " + std::to_string(level) + " (distance " +
                             std::to_string(tc.max_distance) + ")");
          if (level == j) top = tc;
          return project_map(G, target);
        };
        SkeletonMap gk = build(j);
        rec.t = t;
        rec.tube = top;
        res.maps.push_back(gk);
        break;
      } catch (const TubeEscape&) {
        if (rec.retries >= opts.max_retries) throw;
        ++rec.retries;
        t /= 2.0;
      }
    }
    const SkeletonMap& gk = res.maps.back();
    if (opts.lipschitz_pairs > 0) rec.lipschitz = lipschitz_estimate(gk, j, opts.lipschitz_pairs, seed);
    if (opts.compute_errors) rec.error = skeleton_wsp_distance(gk, g, j, s, p, opts.quad);
    res.stages.push_back(rec);
    if (adaptive && k + 1 >= schedule.mu.size() && rec.error.value <= opts.stop_error) break;
  }
  return res;
}

nlohmann::json PipelineLevel::to_json() const {
  nlohmann::json out{{"eps", eps},
                     {"selection", selection.to_json()},
                     {"mesh", mesh.to_json()},
                     {"approximation", approx.to_json()},
                     {"error", error.to_json()},
                     {"lipschitz", lipschitz.to_json()}};
  if (membership) out["membership"] = membership->to_json();
  if (!degree.is_null()) out["degree"] = degree;
  nlohmann::json stages = nlohmann::json::array();
  stages.push_back({{"label", "restricted"}});
  for (const auto& s : approx.stages) {
    stages.push_back({{"label", "hole-filled"}, {"mu", s.mu}});
    stages.push_back({{"label", "mollified"}, {"t", s.t}});
    stages.push_back({{"label", "blended"}, {"k", s.stage}, {"t", s.t}});
    stages.push_back({{"label", "projected"}, {"tube_max_distance", s.tube.max_distance}});
  }
  stages.push_back({{"label", "extended"}});
  out["stage_log"] = stages;
  return out;
}

nlohmann::json PipelineReport::to_json() const {
  nlohmann::json out{{"j", j}, {"verdict", verdict}, {"levels", nlohmann::json::array()}};
  for (const auto& l : levels) out["levels"].push_back(l.to_json());
  return out;
}

PipelineReport thme_pipeline(const FieldMap& f, const ManifoldTarget& target, const PipelineOptions& opts) {
  const double sp = opts.s * opts.p;
  const int n = f.in_dim();
  if (!(opts.s > 0.0 && opts.s < 1.0)) throw ConfigError("pipeline needs 0 < s < 1");
  if (!(sp >= 1.0 && sp < n)) throw ConfigError("pipeline needs 1 <= sp < n");
  if (f.out_dim() != target.ambient_dim()) throw ConfigError("pipeline: field values do not live in the target space");
  for (std::size_t i = 0; i < opts.eps.size(); ++i)
    if (!(opts.eps[i] > 0.0) || (i > 0 && !(opts.eps[i] < opts.eps[i - 1])))
      throw ConfigError("eps schedule must be positive and strictly decreasing");
  PipelineReport rep;
  rep.j = static_cast<int>(std::floor(sp + 1e-12));
  const int j = rep.j;
  std::vector<double> errs, ses;
  for (double eps : opts.eps) {
    PipelineLevel lvl;
    lvl.eps = eps;
    lvl.selection = select_good_T(f, opts.omega, eps, j, opts.s, opts.p, opts.t_count, opts.select_quad);
    auto mesh = std::make_shared<const MeshSpec>(MeshSpec::covering(lvl.selection.best, eps, opts.omega));
    lvl.mesh = *mesh;
    const SkeletonMap g = restrict_to_skeleton(f, mesh, j);
    if (opts.check_membership) lvl.membership = wspj_membership(g, j, opts.s, opts.p, opts.approx.membership_quad);
    ApproximationOptions ao = opts.approx;
    if (opts.stage_tolerance > 0.0) ao.stop_error = opts.stage_tolerance * lvl.selection.best_error;
    lvl.approx = lipschitz_approximate(g, target, opts.s, opts.p, opts.schedule, ao);
    const SkeletonMap& gk = lvl.approx.maps.back();
    const FieldMap h = extend_skeleton_map(gk, j);
    lvl.error = wsp_distance(f, h, opts.omega, opts.s, opts.p, opts.quad);
    lvl.error.params.j = j;
    lvl.error.extra["eps"] = eps;
    lvl.lipschitz = lipschitz_estimate(gk, j, opts.approx.lipschitz_pairs, opts.quad.seed);
    if (opts.degree_circle) {
      const auto& [center, radius] = *opts.degree_circle;
      nlohmann::json d{{"center", center.to_vector()}, {"radius", radius}};
      for (const auto& [name, map] : {std::pair<const char*, const FieldMap*>{"input", &f}, {"output", &h}}) {
        try {
          d[name] = winding_number(*map, center, radius, opts.degree_samples);
        } catch (const Error& e) {
          d[name] = std::string("error: ") + e.what();
        }
      }
      lvl.degree = d;
    }
    errs.push_back(lvl.error.value);
    ses.push_back(lvl.error.std_error);
    rep.levels.push_back(std::move(lvl));
  }
  rep.verdict = trend_verdict(errs, ses, opts.verdict_ratio);
  return rep;
}

}  // namespace fracsob
