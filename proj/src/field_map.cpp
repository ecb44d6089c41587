#include "fracsob/field_map.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fracsob/errors.hpp"
#include "fracsob/manifold.hpp"

namespace fracsob {

double Jacobian::frobenius() const {
  double s = 0.0;
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * (*this)(i, j);
  return std::sqrt(s);
}

Jacobian Jacobian::operator*(const Jacobian& rhs) const {
  Jacobian out(rows_, rhs.cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < rhs.cols_; ++j) {
      double s = 0.0;
      for (int k = 0; k < cols_; ++k) s += (*this)(i, k) * rhs(k, j);
      out(i, j) = s;
    }
  return out;
}

Jacobian Jacobian::operator-(const Jacobian& rhs) const {
  Jacobian out(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j) - rhs(i, j);
  return out;
}

FieldMap::FieldMap(std::string name, int in_dim, int out_dim, EvalFn eval, JacobianFn jacobian)
    : name_(std::move(name)), in_dim_(in_dim), out_dim_(out_dim), eval_(std::move(eval)),
      jacobian_(std::move(jacobian)) {}

Jacobian FieldMap::jacobian(const Vec& x, double h) const {
  if (jacobian_) return jacobian_(x);
  Jacobian J(out_dim_, in_dim_);
  for (int k = 0; k < in_dim_; ++k) {
    Vec xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const Vec fp = eval_(xp), fm = eval_(xm);
    for (int i = 0; i < out_dim_; ++i) J(i, k) = (fp[i] - fm[i]) / (2.0 * h);
  }
  return J;
}

FieldMap difference(const FieldMap& f, const FieldMap& g) {
  if (f.in_dim() != g.in_dim() || f.out_dim() != g.out_dim())
    throw std::invalid_argument("difference: shape mismatch");
  return FieldMap(f.name() + "-" + g.name(), f.in_dim(), f.out_dim(),
                  [f, g](const Vec& x) { return f(x) - g(x); });
}

// ---------------------------------------------------------------- grids

std::size_t GridSamples::node_count() const {
  std::size_t c = 1;
  for (int s : shape) c *= static_cast<std::size_t>(s);
  return c;
}

Vec GridSamples::interpolate(const Vec& x) const {
  std::array<int, kMaxDim> base{};
  std::array<double, kMaxDim> frac{};
  for (int i = 0; i < n; ++i) {
    const int cells = shape[i] - 1;
    if (cells <= 0) {
      base[i] = 0;
      frac[i] = 0.0;
      continue;
    }
    double u = (x[i] - box.lo[i]) / (box.hi[i] - box.lo[i]) * cells;
    u = std::clamp(u, 0.0, static_cast<double>(cells));
    int b = static_cast<int>(std::floor(u));
    if (b >= cells) b = cells - 1;
    base[i] = b;
    frac[i] = u - b;
  }
  Vec out(m, 0.0);
  const int corners = 1 << n;
  for (int mask = 0; mask < corners; ++mask) {
    double w = 1.0;
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i) {
      const int bit = (mask >> i) & 1;
      if (bit && shape[i] == 1) {
        w = 0.0;
        break;
      }
      w *= bit ? frac[i] : 1.0 - frac[i];
      idx = idx * static_cast<std::size_t>(shape[i]) + static_cast<std::size_t>(base[i] + bit);
    }
    if (w == 0.0) continue;
    for (int c = 0; c < m; ++c) out[c] += w * values[idx * m + c];
  }
  return out;
}

GridSamples sample_on_grid(const FieldMap& f, const Box& box, const std::vector<int>& shape) {
  GridSamples g;
  g.n = f.in_dim();
  g.m = f.out_dim();
  g.box = box;
  g.shape = shape;
  if (static_cast<int>(shape.size()) != g.n) throw std::invalid_argument("sample_on_grid: shape rank");
  g.values.resize(g.node_count() * g.m);
  std::vector<int> idx(g.n, 0);
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    Vec x(g.n);
    for (int i = 0; i < g.n; ++i)
      x[i] = shape[i] == 1 ? box.lo[i] : box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / (shape[i] - 1);
    const Vec v = f(x);
    for (int c = 0; c < g.m; ++c) g.values[node * g.m + c] = v[c];
    for (int i = g.n - 1; i >= 0; --i) {
      if (++idx[i] < shape[i]) break;
      idx[i] = 0;
    }
  }
  return g;
}

FieldMap grid_field(std::shared_ptr<const GridSamples> grid, std::string name) {
  const int n = grid->n, m = grid->m;
  return FieldMap(std::move(name), n, m, [grid](const Vec& x) { return grid->interpolate(x); });
}

namespace {

constexpr char kGridMagic[8] = {'F', 'S', 'G', 'R', 'I', 'D', '0', '1'};

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw Error("grid file truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

std::vector<double> parse_csv_numbers(const std::string& line, std::size_t skip) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  std::size_t k = 0;
  while (std::getline(ss, cell, ',')) {
    if (k++ < skip) continue;
    out.push_back(std::stod(cell));
  }
  return out;
}

void validate_grid(const GridSamples& g) {
  if (g.n < 1 || g.n > kMaxDim || g.m < 1 || g.m > kMaxDim) throw Error("grid: bad dimensions");
  if (static_cast<int>(g.shape.size()) != g.n) throw Error("grid: bad shape rank");
  for (int s : g.shape)
    if (s < 1) throw Error("grid: empty axis");
  if (!g.box.valid()) throw Error("grid: degenerate box");
  if (g.values.size() != g.node_count() * g.m) throw Error("grid: value count mismatch");
}

}  // namespace

void write_grid_binary(const GridSamples& grid, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write(kGridMagic, sizeof(kGridMagic));
  put_le<std::int32_t>(os, grid.n);
  put_le<std::int32_t>(os, grid.m);
  for (int i = 0; i < grid.n; ++i) put_le<double>(os, grid.box.lo[i]);
  for (int i = 0; i < grid.n; ++i) put_le<double>(os, grid.box.hi[i]);
  for (int s : grid.shape) put_le<std::int32_t>(os, s);
  for (double v : grid.values) put_le<double>(os, v);
  if (!os) throw Error("write failed: " + path.string());
}

void write_grid_csv(const GridSamples& grid, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.precision(17);
  os << "fracsob-grid,1," << grid.n << ',' << grid.m << '\n';
  os << "lo";
  for (int i = 0; i < grid.n; ++i) os << ',' << grid.box.lo[i];
  os << "\nhi";
  for (int i = 0; i < grid.n; ++i) os << ',' << grid.box.hi[i];
  os << "\nshape";
  for (int s : grid.shape) os << ',' << s;
  os << '\n';
  for (std::size_t node = 0; node < grid.node_count(); ++node) {
    for (int c = 0; c < grid.m; ++c) os << (c ? "," : "") << grid.values[node * grid.m + c];
    os << '\n';
  }
  if (!os) throw Error("write failed: " + path.string());
}

GridSamples read_grid(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open grid file " + path.string());
  char magic[8] = {};
  is.read(magic, 8);
  GridSamples g;
  if (is && std::memcmp(magic, kGridMagic, 8) == 0) {
    g.n = get_le<std::int32_t>(is);
    g.m = get_le<std::int32_t>(is);
    if (g.n < 1 || g.n > kMaxDim || g.m < 1 || g.m > kMaxDim) throw Error("grid: bad dimensions");
    g.box.lo = Vec(g.n);
    g.box.hi = Vec(g.n);
    for (int i = 0; i < g.n; ++i) g.box.lo[i] = get_le<double>(is);
    for (int i = 0; i < g.n; ++i) g.box.hi[i] = get_le<double>(is);
    g.shape.resize(g.n);
    for (int i = 0; i < g.n; ++i) g.shape[i] = get_le<std::int32_t>(is);
    for (int s : g.shape)
      if (s < 1) throw Error("grid: empty axis");
    g.values.resize(g.node_count() * g.m);
    for (double& v : g.values) v = get_le<double>(is);
  } else {
    is.clear();
    is.seekg(0);
    std::string line;
    std::getline(is, line);
    if (line.rfind("fracsob-grid,1,", 0) != 0) throw Error("unrecognized grid file " + path.string());
    const auto head = parse_csv_numbers(line, 2);
    if (head.size() != 2) throw Error("grid: bad CSV header");
    g.n = static_cast<int>(head[0]);
    g.m = static_cast<int>(head[1]);
    if (g.n < 1 || g.n > kMaxDim || g.m < 1 || g.m > kMaxDim) throw Error("grid: bad dimensions");
    std::getline(is, line);
    g.box.lo = Vec(std::span<const double>(parse_csv_numbers(line, 1)));
    std::getline(is, line);
    g.box.hi = Vec(std::span<const double>(parse_csv_numbers(line, 1)));
    std::getline(is, line);
    for (double s : parse_csv_numbers(line, 1)) g.shape.push_back(static_cast<int>(s));
    validate_grid(GridSamples{g.n, g.m, g.box, g.shape, std::vector<double>(g.node_count() * g.m)});
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      for (double v : parse_csv_numbers(line, 0)) g.values.push_back(v);
    }
  }
  validate_grid(g);
  return g;
}

// ---------------------------------------------------------------- registry

FieldMap constant_field(int n, const Vec& value) {
  return FieldMap("constant", n, value.size(), [value](const Vec&) { return value; },
                  [n, m = value.size()](const Vec&) { return Jacobian(m, n); });
}

FieldMap linear_x1_field(int n) {
  return FieldMap("linear-x1", n, 1, [](const Vec& x) { return Vec{x[0]}; },
                  [n](const Vec&) {
                    Jacobian J(1, n);
                    J(0, 0) = 1.0;
                    return J;
                  });
}

FieldMap gauss_bump_field(const Vec& center, double width, double amplitude) {
  const int n = center.size();
  auto value = [=](const Vec& x) {
    double r2 = 0.0;
    for (int i = 0; i < n; ++i) r2 += (x[i] - center[i]) * (x[i] - center[i]);
    return amplitude * std::exp(-r2 / (2.0 * width * width));
  };
  return FieldMap("gauss-bump", n, 1, [value](const Vec& x) { return Vec{value(x)}; },
                  [=](const Vec& x) {
                    Jacobian J(1, n);
                    const double v = value(x);
                    for (int i = 0; i < n; ++i) J(0, i) = -v * (x[i] - center[i]) / (width * width);
                    return J;
                  });
}

FieldMap phase_bump_field(const Vec& center, double width, double amplitude) {
  const FieldMap phi = gauss_bump_field(center, width, amplitude);
  const int n = center.size();
  return FieldMap("phase-bump", n, 2,
                  [phi](const Vec& x) {
                    const double a = phi(x)[0];
                    return Vec{std::cos(a), std::sin(a)};
                  },
                  [phi, n](const Vec& x) {
                    const double a = phi(x)[0];
                    const Jacobian dphi = phi.jacobian(x);
                    Jacobian J(2, n);
                    for (int i = 0; i < n; ++i) {
                      J(0, i) = -std::sin(a) * dphi(0, i);
                      J(1, i) = std::cos(a) * dphi(0, i);
                    }
                    return J;
                  });
}

FieldMap double_vortex_field(int n) {
  if (n < 2) throw std::invalid_argument("double-vortex needs n >= 2");
  return FieldMap("double-vortex", n, 2, [](const Vec& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    if (r2 == 0.0) throw ExceptionalPoint("double-vortex undefined on its singular plane");
    return Vec{(x[0] * x[0] - x[1] * x[1]) / r2, 2.0 * x[0] * x[1] / r2};
  });
}

namespace {

Vec json_vec(const nlohmann::json& j, int n, double fill) {
  if (j.is_null()) return Vec(n, fill);
  if (j.is_number()) return Vec(n, j.get<double>());
  const auto v = j.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != n) throw ConfigError("field parameter has wrong length");
  return Vec(std::span<const double>(v));
}

}  // namespace

FieldMap make_field(const std::string& name, int n, const nlohmann::json& params) {
  if (n < 1 || n > kMaxDim) throw ConfigError("field dimension out of range");
  const auto get = [&](const char* key) { return params.contains(key) ? params.at(key) : nlohmann::json(); };
  if (name == "constant") {
    const auto v = params.value("value", std::vector<double>{1.0});
    return constant_field(n, Vec(std::span<const double>(v)));
  }
  if (name == "linear-x1") return linear_x1_field(n);
  if (name == "identity") {
    return FieldMap("identity", n, n, [](const Vec& x) { return x; }, [n](const Vec&) {
      Jacobian J(n, n);
      for (int i = 0; i < n; ++i) J(i, i) = 1.0;
      return J;
    });
  }
  if (name == "gauss-bump")
    return gauss_bump_field(json_vec(get("center"), n, 0.5), params.value("width", 0.15),
                            params.value("amplitude", 1.0));
  if (name == "phase-bump")
    return phase_bump_field(json_vec(get("center"), n, 0.5), params.value("width", 0.15),
                            params.value("amplitude", std::numbers::pi));
  if (name == "vortex") {
    FieldMap v = vortex_map(n, params.value("k", 1));
    if (!params.contains("center")) return v;
    const Vec c = json_vec(get("center"), n, 0.0);
    return FieldMap("vortex", n, v.out_dim(), [v, c](const Vec& x) { return v(x - c); },
                    [v, c](const Vec& x) { return v.jacobian(x - c); });
  }
  if (name == "double-vortex") return double_vortex_field(n);
  if (name == "grid") {
    if (!params.contains("path")) throw ConfigError("grid field needs params.path");
    auto grid = std::make_shared<const GridSamples>(read_grid(params.at("path").get<std::string>()));
    if (grid->n != n) throw ConfigError("grid dimension does not match n");
    return grid_field(grid);
  }
  throw ConfigError("unknown field map '" + name + "'");
}

std::vector<std::string> field_names() {
  return {"constant", "linear-x1", "identity", "gauss-bump", "phase-bump", "vortex", "double-vortex", "grid"};
}

}  // namespace fracsob
