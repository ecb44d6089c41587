#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fracsob/vec.hpp"

namespace fracsob {

/// Dense m x n Jacobian, row-major.
class Jacobian {
 public:
  Jacobian() = default;
  Jacobian(int rows, int cols) : rows_(rows), cols_(cols) {}
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return a_[i * kMaxDim + j]; }
  double operator()(int i, int j) const { return a_[i * kMaxDim + j]; }
  double frobenius() const;
  Jacobian operator*(const Jacobian& rhs) const;
  Jacobian operator-(const Jacobian& rhs) const;

 private:
  std::array<double, kMaxDim * kMaxDim> a_{};
  int rows_ = 0;
  int cols_ = 0;
};

/// An everywhere-evaluatable map R^n -> R^m. Undefined points (singular sets)
/// raise ExceptionalPoint from the evaluator.
class FieldMap {
 public:
  using EvalFn = std::function<Vec(const Vec&)>;
  using JacobianFn = std::function<Jacobian(const Vec&)>;

  FieldMap() = default;
  FieldMap(std::string name, int in_dim, int out_dim, EvalFn eval, JacobianFn jacobian = {});

  const std::string& name() const { return name_; }
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }
  explicit operator bool() const { return static_cast<bool>(eval_); }

  Vec operator()(const Vec& x) const { return eval_(x); }
  /// Analytic Jacobian when available, otherwise central differences with step h.
  Jacobian jacobian(const Vec& x, double h = 1e-6) const;

 private:
  std::string name_;
  int in_dim_ = 0;
  int out_dim_ = 0;
  EvalFn eval_;
  JacobianFn jacobian_;
};

/// f - g with matching shapes.
FieldMap difference(const FieldMap& f, const FieldMap& g);

/// Uniform tensor-grid samples of a map over a box; evaluated everywhere by
/// multilinear interpolation, clamped to the box.
struct GridSamples {
  int n = 0;
  int m = 0;
  Box box;
  std::vector<int> shape;      // nodes per axis, row-major with the last axis fastest
  std::vector<double> values;  // prod(shape) * m, values of one node contiguous

  std::size_t node_count() const;
  Vec interpolate(const Vec& x) const;
};

GridSamples sample_on_grid(const FieldMap& f, const Box& box, const std::vector<int>& shape);
FieldMap grid_field(std::shared_ptr<const GridSamples> grid, std::string name = "grid");

/// Binary layout (little-endian): "FSGRID01", int32 n, int32 m, float64 lo[n],
/// float64 hi[n], int32 shape[n], float64 values[prod(shape) * m].
void write_grid_binary(const GridSamples& grid, const std::filesystem::path& path);
/// CSV layout: "fracsob-grid,1,<n>,<m>", "lo,...", "hi,...", "shape,...", then
/// one row of m values per node in row-major order.
void write_grid_csv(const GridSamples& grid, const std::filesystem::path& path);
/// Reads either layout (detected from the first bytes).
GridSamples read_grid(const std::filesystem::path& path);

/// Registry of analytic maps exposed to the CLI. Recognized names:
/// "constant", "linear-x1", "identity", "gauss-bump", "phase-bump", "vortex",
/// "double-vortex", "grid" (params.path).
FieldMap make_field(const std::string& name, int n, const nlohmann::json& params = nlohmann::json::object());
std::vector<std::string> field_names();

// Direct constructors used by the registry and the tests.
FieldMap constant_field(int n, const Vec& value);
FieldMap linear_x1_field(int n);
FieldMap gauss_bump_field(const Vec& center, double width, double amplitude = 1.0);
/// x -> (cos phi, sin phi), phi a Gaussian bump: a smooth, null-homotopic S^1-valued map.
FieldMap phase_bump_field(const Vec& center, double width, double amplitude);
/// x -> (x_1^2 - x_2^2, 2 x_1 x_2) / |(x_1, x_2)|^2, degree 2 around the x_1 x_2 origin.
FieldMap double_vortex_field(int n);

}  // namespace fracsob
