#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fracsob/manifold.hpp"
#include "fracsob/pipeline.hpp"
#include "fracsob/selection.hpp"
#include "fracsob/sobolev.hpp"

namespace fracsob {

/// Parsed experiment file. Only the sections relevant to `experiment` are read;
/// the raw document is kept for experiment-specific options.
struct ExperimentConfig {
  std::string name;        // output file stem
  std::string experiment;  // norm | approx-eval | converge | w11-failure | degree | kernel-check | pipeline
  std::string field = "gauss-bump";
  int n = 2;
  nlohmann::json field_params = nlohmann::json::object();
  SobolevParams sobolev;
  Box omega;
  std::vector<double> eps{0.4, 0.2, 0.1, 0.05};
  std::size_t t_samples = 32;
  QuadratureSpec quad;
  std::optional<ManifoldTarget> target;
  std::filesystem::path out_dir = "out";
  double verdict_ratio = 0.5;
  nlohmann::json raw;

  /// Reads and validates. Relative paths inside the file resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
  FieldMap make_field() const;
  nlohmann::json to_json() const;
};

/// One CSV row; the column order is op,s,p,j,eps,value,stderr,seed,samples.
struct CsvRow {
  std::string op;
  double s = 0.0, p = 0.0;
  int j = -1;
  double eps = 0.0;
  double value = 0.0, std_error = 0.0;
  std::uint64_t seed = 0, samples = 0;
};
inline constexpr const char* kCsvHeader = "op,s,p,j,eps,value,stderr,seed,samples";

/// Result of any experiment: the full JSON document, tabular rows, two-column
/// series for plotting, and the verdict that drives the exit code.
struct ExperimentReport {
  std::string name;
  std::string experiment;
  std::string verdict;
  bool pass = true;
  nlohmann::json json = nlohmann::json::object();
  std::vector<CsvRow> rows;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
};

struct ConvergenceRow {
  double eps = 0.0;
  TSelection selection;
  nlohmann::json to_json() const;
};
struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::string verdict;
  double ratio = 0.5;
  nlohmann::json to_json() const;
};

/// Best-of-count translation selection for every eps of the schedule.
ConvergenceReport convergence_study(const FieldMap& f, const Box& omega, const std::vector<double>& eps, int j, double s,
                                    double p, std::size_t t_count, const QuadratureSpec& quad, double ratio = 0.5);

/// Mean of |x_1| / |x|_2 over [-1, 1]^2 by adaptive cubature.
double cstar_oracle();

/// int |grad u_T - grad u| over omega for the extension of u on `mesh`: cubature on
/// every sector piece of every cube, full cubes computed once.
struct W11Row {
  double eps = 0.0;
  Vec T;
  double value = 0.0;
  double error = 0.0;
  double full_cube_area = 0.0;
  int full_cubes = 0;
};
W11Row w11_gradient_gap(const FieldMap& u, const Box& omega, const Vec& T, double eps);

ExperimentReport run_norm(const ExperimentConfig& cfg);
ExperimentReport run_approx_eval(const ExperimentConfig& cfg);
ExperimentReport run_convergence(const ExperimentConfig& cfg);
ExperimentReport run_w11_failure(const ExperimentConfig& cfg);
ExperimentReport run_degree_demo(const ExperimentConfig& cfg);
ExperimentReport run_kernel_verification(const ExperimentConfig& cfg);
ExperimentReport run_pipeline(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Mean over T samples of (skeleton seminorm within 2 eps + cross term) / ||f||^p.
struct SlicingResult {
  double eps = 0.0;
  std::size_t t_count = 0;
  double mean_ratio = 0.0;
  double std_error = 0.0;
  double f_norm_p = 0.0;
};
SlicingResult slicing_ratio(const FieldMap& f, const Box& box, double eps, int j, double s, double p,
                            std::size_t t_count, const QuadratureSpec& quad);

/// ||g_mu - g||^p on the top skeleton for each mu, common seed.
std::vector<NormReport> hole_fill_errors(const SkeletonMap& g, const std::vector<double>& mus, double s, double p,
                                         const QuadratureSpec& quad);

/// ||h||^p over the mesh bounds divided by ||g||^p on the j-skeleton, for the
/// extension h of g.
struct ContinuityRatio {
  double ratio = 0.0;
  double extension_norm_p = 0.0;
  double skeleton_norm_p = 0.0;
};
ContinuityRatio extension_continuity_ratio(const SkeletonMap& g, int j, double s, double p, const QuadratureSpec& quad);

/// Writes <name>.json, <name>.csv and one <name>.<series>.dat per series into
/// `dir`. Output is a pure function of the report.
std::vector<std::filesystem::path> emit_report(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace fracsob
