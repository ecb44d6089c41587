// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status 1 if any fail.
//
//   acceptance [criterion ...]      (default: all of 1..10)

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fracsob/errors.hpp"
#include "fracsob/experiments.hpp"
#include "fracsob/rng.hpp"

using namespace fracsob;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(FRACSOB_SOURCE_DIR) / "configs";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

QuadratureSpec mc(std::uint64_t samples, std::uint64_t seed = 1) {
  QuadratureSpec q;
  q.samples = samples;
  q.seed = seed;
  return q;
}

std::map<std::string, ExperimentReport>& report_cache() {
  static std::map<std::string, ExperimentReport> cache;
  return cache;
}

const ExperimentReport& shipped(const std::string& stem) {
  auto& cache = report_cache();
  auto it = cache.find(stem);
  if (it == cache.end())
    it = cache.emplace(stem, run_experiment(ExperimentConfig::load(kConfigs / (stem + ".json")))).first;
  return it->second;
}

// ---------------------------------------------------------------------------

Outcome seminorm_oracle() {
  Outcome o{true, ""};
  const Box unit{Vec{0.0}, Vec{1.0}};
  for (const auto& [s, p] : {std::pair{0.5, 2.0}, std::pair{0.5, 1.0}, std::pair{0.3, 2.0}}) {
    const double expect = 2.0 / ((p - s * p) * (p - s * p + 1.0));
    const NormReport r = gagliardo_seminorm_p(linear_x1_field(1), unit, s, p, mc(1'000'000));
    const double rel = std::abs(r.value / expect - 1.0);
    o.pass = o.pass && rel < 0.02;
    o.detail += fmt("(s=%g,p=%g) %.5f vs %.5f rel %.2e; ", s, p, r.value, expect, rel);
  }
  return o;
}

std::int64_t ulp_distance(double a, double b) {
  if (a == b) return 0;
  std::int64_t ia, ib;
  std::memcpy(&ia, &a, 8);
  std::memcpy(&ib, &b, 8);
  if (ia < 0) ia = std::numeric_limits<std::int64_t>::min() - ia;
  if (ib < 0) ib = std::numeric_limits<std::int64_t>::min() - ib;
  return std::abs(ia - ib);
}

Outcome projection_algebra() {
  std::int64_t worst_ulp = 0;
  std::size_t beyond_one_ulp = 0;
  std::size_t points = 0, pinned_mismatch = 0, not_idempotent = 0, outside = 0;
  Rng rng(20240101);
  const double eps = 0.37;
  for (int n = 2; n <= 3; ++n)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < 100'000; ++i) {
        Vec x(n);
        for (auto& c : x) c = rng.uniform(-eps, eps);
        ProjectionResult direct;
        try {
          direct = project_to_skeleton(x, j, eps);
        } catch (const Error&) {
          continue;
        }
        ++points;
        SkeletonPoint pt{IVec(n, 0), x, 0, n};
        for (int k = n; k > j; --k) pt = project_step(pt, eps);
        if (pt.pinned != direct.pinned) ++pinned_mismatch;
        std::int64_t u = 0;
        for (int a = 0; a < n; ++a) u = std::max(u, ulp_distance(pt.local[a], direct.target[a]));
        worst_ulp = std::max(worst_ulp, u);
        beyond_one_ulp += u > 1;
        if (!(project_to_skeleton(direct.target, j, eps).target == direct.target)) ++not_idempotent;
        for (int a = 0; a < n; ++a)
          if (std::abs(x[a] - direct.target[a]) > eps) ++outside;
      }
  return {worst_ulp <= 1 && pinned_mismatch == 0 && not_idempotent == 0 && outside == 0,
          fmt("%zu points, max %lld ulp between composed and direct (%zu points beyond 1 ulp), %zu pinned mismatches, "
              "%zu non-idempotent, %zu outside Q_eps",
              points, static_cast<long long>(worst_ulp), beyond_one_ulp, pinned_mismatch, not_idempotent, outside)};
}

Outcome convergence() {
  const ExperimentReport& bump = shipped("smooth-bump");
  const ExperimentReport& pipe = shipped("pipeline-phase-bump");
  std::string d = "smooth-bump " + bump.verdict + " [";
  for (const auto& row : bump.json.at("convergence").at("rows"))
    d += fmt("%g:%.4g ", row.at("eps").get<double>(), row.at("min_error").get<double>());
  d += "]; phase-bump pipeline " + pipe.verdict + " [";
  for (const auto& lvl : pipe.json.at("pipeline").at("levels"))
    d += fmt("%g:%.4g ", lvl.at("eps").get<double>(), lvl.at("error").at("value").get<double>());
  d += "]";
  return {bump.verdict == kDecreasing && pipe.verdict == kDecreasing, d};
}

Outcome w11_failure() {
  const ExperimentReport& r = shipped("w11");
  const double floor = r.json.at("floor").get<double>();
  const double min_gap = r.json.at("min_gap").get<double>();
  return {r.pass, fmt("c* = %.9f, min gap %.4f vs 0.8*c*/2 = %.4f (%s); companion at (0.4,2): %s",
                      r.json.at("cstar").get<double>(), min_gap, 0.8 * floor, r.verdict.c_str(),
                      r.json.at("companion").at("verdict").get<std::string>().c_str())};
}

Outcome degree() {
  const ExperimentReport& r = shipped("degree");
  bool exact = true;
  std::string d;
  for (const auto& w : r.json.at("windings")) {
    const double turns = w.at("turns").get<double>();
    exact = exact && std::abs(turns - std::round(turns)) < 1e-6 && w.at("winding") == w.at("expected");
    d += fmt("%s r=%g: %d; ", w.at("map").get<std::string>().c_str(), w.at("radius").get<double>(),
             w.at("winding").get<int>());
  }
  return {r.pass && exact, d + "(1024 samples)"};
}

Outcome kernel() {
  const ExperimentReport& r = shipped("kernel");
  bool ok = r.pass;
  std::string d;
  for (const auto& row : r.json.at("table")) {
    const double change = row.at("relative_change").get<double>();
    ok = ok && change < 0.05;
    d += fmt("(n=%d,j=%d,s=%g,p=%g) max %.4g change %.2f%%; ", row.at("n").get<int>(), row.at("j").get<int>(),
             row.at("s").get<double>(), row.at("p").get<double>(), row.at("max_ratio_refined").get<double>(),
             100.0 * change);
  }
  return {ok, d};
}

Outcome slicing() {
  const FieldMap f = gauss_bump_field(Vec{0.5, 0.5}, 0.15);
  const Box box = Box::cube(2, -0.5, 1.5);
  Outcome o{true, ""};
  for (double eps : {0.2, 0.1}) {
    const SlicingResult a = slicing_ratio(f, box, eps, 1, 0.4, 2.0, 64, mc(20'000));
    const SlicingResult b = slicing_ratio(f, box, eps, 1, 0.4, 2.0, 128, mc(20'000));
    const double drift = std::abs(b.mean_ratio / a.mean_ratio - 1.0);
    o.pass = o.pass && drift < 0.10;
    o.detail += fmt("eps=%g: 64 T %.4f, 128 T %.4f, drift %.2f%%; ", eps, a.mean_ratio, b.mean_ratio, 100 * drift);
  }
  return o;
}

Outcome hole_filling() {
  auto mesh = std::make_shared<const MeshSpec>(MeshSpec::covering(Vec{0.013, -0.021}, 0.2, Box::cube(2, 0, 1)));
  const SkeletonMap g = restrict_to_skeleton(gauss_bump_field(Vec{0.5, 0.5}, 0.15), mesh, 1);
  const auto errs = hole_fill_errors(g, {0.3, 0.2, 0.1, 0.05}, 0.4, 2.0, mc(400'000));
  bool strict = true;
  std::string d;
  for (std::size_t i = 0; i < errs.size(); ++i) {
    if (i > 0) strict = strict && errs[i].value < errs[i - 1].value;
    d += fmt("mu=%g: %.4g; ", errs[i].extra.at("mu").get<double>(), errs[i].value);
  }
  const double ratio = errs.back().value / errs.front().value;
  return {strict && ratio < 0.2, d + fmt("final/initial %.3f", ratio)};
}

Outcome extension_continuity() {
  auto mesh = std::make_shared<const MeshSpec>(MeshSpec{Vec{0.5, 0.5}, 0.5, 2, Box::cube(2, -1, 1)});
  Rng rng(77);
  double max1 = 0.0, max2 = 0.0;
  for (int i = 0; i < 20; ++i) {
    // Affine part plus one random Fourier mode: Lipschitz with constant <= |a| + |b||k|.
    const double a0 = rng.uniform(-1, 1), a1 = rng.uniform(-1, 1), a2 = rng.uniform(-1, 1);
    const double b = rng.uniform(0.2, 1.0), k1 = rng.uniform(-4, 4), k2 = rng.uniform(-4, 4),
                 ph = rng.uniform(0, 6.283185307179586);
    const FieldMap f("lipschitz", 2, 1, [=](const Vec& x) {
      return Vec{a0 + a1 * x[0] + a2 * x[1] + b * std::sin(k1 * x[0] + k2 * x[1] + ph)};
    });
    const SkeletonMap g = restrict_to_skeleton(f, mesh, 1);
    max1 = std::max(max1, extension_continuity_ratio(g, 1, 0.4, 2.0, mc(100'000, 5)).ratio);
    max2 = std::max(max2, extension_continuity_ratio(g, 1, 0.4, 2.0, mc(200'000, 5)).ratio);
  }
  const double drift = std::abs(max2 / max1 - 1.0);
  return {drift < 0.10, fmt("max ratio %.4f at N, %.4f at 2N, drift %.2f%% over 20 maps", max1, max2, 100 * drift)};
}

std::map<std::string, std::string> slurp_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "fracsob-acceptance";
  fs::remove_all(root);
  std::set<std::string> stems;
  for (const auto& e : fs::directory_iterator(kConfigs))
    if (e.path().extension() == ".json" && e.path().stem() != "misconfigured") stems.insert(e.path().stem().string());
  std::size_t files = 0;
  std::vector<std::string> differing;
  for (const auto& stem : stems) {
    const ExperimentConfig cfg = ExperimentConfig::load(kConfigs / (stem + ".json"));
    emit_report(shipped(stem), root / "a" / stem);
    emit_report(run_experiment(cfg), root / "b" / stem);
    const auto a = slurp_dir(root / "a" / stem), b = slurp_dir(root / "b" / stem);
    files += a.size();
    if (a != b) differing.push_back(stem);
  }
  fs::remove_all(root);
  std::string d = fmt("%zu configs, %zu files compared", stems.size(), files);
  for (const auto& s : differing) d += "; differs: " + s;
  return {differing.empty(), d};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"seminorm oracle", seminorm_oracle},
      {"projection algebra", projection_algebra},
      {"convergence", convergence},
      {"W^{1,1} failure", w11_failure},
      {"degree obstruction", degree},
      {"kernel bound stability", kernel},
      {"slicing bounds", slicing},
      {"hole filling", hole_filling},
      {"extension continuity", extension_continuity},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d %-24s %s  %s\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
