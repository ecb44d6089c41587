#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace fracsob {

/// Largest ambient or target dimension supported by the inline vector types.
inline constexpr int kMaxDim = 6;

/// Small fixed-capacity vector with value semantics. Points of R^n and values
/// in R^m are always tiny here, so nothing is heap allocated on the hot paths.
template <typename T>
class SmallVec {
 public:
  SmallVec() = default;
  explicit SmallVec(int n, T fill = T{}) : n_(n) {
    check(n);
    std::fill_n(d_.begin(), n, fill);
  }
  SmallVec(std::initializer_list<T> init) : n_(static_cast<int>(init.size())) {
    check(n_);
    std::copy(init.begin(), init.end(), d_.begin());
  }
  explicit SmallVec(std::span<const T> s) : n_(static_cast<int>(s.size())) {
    check(n_);
    std::copy(s.begin(), s.end(), d_.begin());
  }

  int size() const { return n_; }
  T& operator[](int i) { return d_[i]; }
  const T& operator[](int i) const { return d_[i]; }
  T* begin() { return d_.data(); }
  T* end() { return d_.data() + n_; }
  const T* begin() const { return d_.data(); }
  const T* end() const { return d_.data() + n_; }
  std::span<const T> span() const { return {d_.data(), static_cast<size_t>(n_)}; }
  std::vector<T> to_vector() const { return {begin(), end()}; }

  friend bool operator==(const SmallVec& a, const SmallVec& b) {
    return a.n_ == b.n_ && std::equal(a.begin(), a.end(), b.begin());
  }

 private:
  static void check(int n) {
    if (n < 0 || n > kMaxDim) throw std::invalid_argument("dimension exceeds kMaxDim");
  }
  std::array<T, kMaxDim> d_{};
  int n_ = 0;
};

using Vec = SmallVec<double>;
using IVec = SmallVec<std::int64_t>;

inline Vec operator+(Vec a, const Vec& b) {
  for (int i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}
inline Vec operator-(Vec a, const Vec& b) {
  for (int i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}
inline Vec operator*(double s, Vec a) {
  for (auto& x : a) x *= s;
  return a;
}

inline double sup_norm(const Vec& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}
inline double euclid_norm(const Vec& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}
inline double sup_dist(const Vec& a, const Vec& b) { return sup_norm(a - b); }
inline double euclid_dist(const Vec& a, const Vec& b) { return euclid_norm(a - b); }

/// Axis-aligned closed box [lo, hi] in R^n.
struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return lo.size(); }
  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
    return v;
  }
  double diameter() const {  // sup-norm diameter
    double d = 0.0;
    for (int i = 0; i < dim(); ++i) d = std::max(d, hi[i] - lo[i]);
    return d;
  }
  bool contains(const Vec& x) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }
  bool valid() const {
    if (lo.size() != hi.size() || lo.size() == 0) return false;
    for (int i = 0; i < dim(); ++i)
      if (!(hi[i] > lo[i])) return false;
    return true;
  }
  static Box cube(int n, double lo, double hi) { return {Vec(n, lo), Vec(n, hi)}; }
};

}  // namespace fracsob
