#include "fracsob/selection.hpp"

#include <cmath>
#include <cstring>

#include "fracsob/errors.hpp"
#include "fracsob/rng.hpp"

namespace fracsob {

nlohmann::json TSelection::to_json() const {
  nlohmann::json s = nlohmann::json::array();
  for (const auto& t : samples) s.push_back({{"T", t.T.to_vector()}, {"error", t.error}, {"std_error", t.std_error}});
  return {{"best_T", best.to_vector()}, {"min_error", best_error}, {"min_std_error", best_std_error},
          {"mean_error", mean_error},   {"std", std_dev},         {"samples", s}};
}

std::vector<Vec> sample_translations(int n, double eps, std::size_t count, std::uint64_t seed) {
  std::uint64_t key;
  std::memcpy(&key, &eps, sizeof key);
  Rng rng(seed, "translations", key);
  std::vector<Vec> out;
  for (std::size_t i = 0; i < count; ++i) {
    Vec t(n);
    for (int a = 0; a < n; ++a) t[a] = rng.uniform(-eps, eps);
    out.push_back(t);
  }
  return out;
}

NormReport extension_error(const FieldMap& f, const Box& omega, const Vec& T, double eps, int j, double s, double p,
                           const QuadratureSpec& quad) {
  const MeshSpec mesh = MeshSpec::covering(T, eps, omega);
  NormReport r = wsp_distance(f, homogeneous_extension(f, mesh, j), omega, s, p, quad);
  r.params.j = j;
  r.extra["eps"] = eps;
  r.extra["T"] = T.to_vector();
  return r;
}

TSelection select_good_T(const FieldMap& f, const Box& omega, double eps, int j, double s, double p,
                         const std::vector<Vec>& candidates, const QuadratureSpec& quad) {
  if (candidates.empty()) throw PreconditionError("select_good_T: need at least one translation");
  TSelection sel;
  std::vector<double> errs;
  for (const Vec& T : candidates) {
    const NormReport r = extension_error(f, omega, T, eps, j, s, p, quad);
    sel.samples.push_back({T, r.value, r.std_error});
    errs.push_back(r.value);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < errs.size(); ++i)
    if (errs[i] < errs[best]) best = i;
  sel.best = sel.samples[best].T;
  sel.best_error = sel.samples[best].error;
  sel.best_std_error = sel.samples[best].std_error;
  sel.mean_error = pairwise_sum(errs) / static_cast<double>(errs.size());
  std::vector<double> dev;
  for (double e : errs) dev.push_back((e - sel.mean_error) * (e - sel.mean_error));
  sel.std_dev = errs.size() > 1 ? std::sqrt(pairwise_sum(dev) / static_cast<double>(errs.size() - 1)) : 0.0;
  return sel;
}

TSelection select_good_T(const FieldMap& f, const Box& omega, double eps, int j, double s, double p,
                         std::size_t count, const QuadratureSpec& quad) {
  if (count < 1) throw PreconditionError("select_good_T: count must be >= 1");
  return select_good_T(f, omega, eps, j, s, p, sample_translations(omega.dim(), eps, count, quad.seed), quad);
}

std::string trend_verdict(const std::vector<double>& values, const std::vector<double>& std_errors, double ratio) {
  if (values.size() < 2) return kInconclusive;
  bool monotone = true;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    const double se = std::hypot(std_errors[i], std_errors[i + 1]);
    monotone = monotone && values[i + 1] <= values[i] + se;
  }
  if (monotone && values.back() < ratio * values.front()) return kDecreasing;
  if (values.back() >= values.front()) return kNonDecreasing;
  return kInconclusive;
}

}  // namespace fracsob
