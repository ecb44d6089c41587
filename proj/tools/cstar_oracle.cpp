// Prints c* = mean of |x_1| / |x|_2 over [-1,1]^2 from two independent rules:
// composite Simpson on the inner closed form sqrt(1+y^2) - y, and a 2D midpoint
// rule with Richardson extrapolation. The library value comes from adaptive cubature.

#include <cmath>
#include <cstdio>

#include "fracsob/experiments.hpp"

namespace {

double simpson_inner(int m) {
  const double h = 1.0 / m;
  double s = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double y = i * h;
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * (std::sqrt(1.0 + y * y) - y);
  }
  return s * h / 3.0;
}

double midpoint_2d(int m) {
  const double h = 1.0 / m;
  double s = 0.0;
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k) {
      const double x = (i + 0.5) * h, y = (k + 0.5) * h;
      s += x / std::hypot(x, y);
    }
  return s * h * h;
}

}  // namespace

int main() {
  const double simpson = simpson_inner(200000);
  const double m1 = midpoint_2d(2000), m2 = midpoint_2d(4000);
  const double richardson = (4.0 * m2 - m1) / 3.0;
  const double closed = (std::sqrt(2.0) + std::asinh(1.0) - 1.0) / 2.0;
  std::printf("simpson     %.15f\n", simpson);
  std::printf("midpoint    %.15f\n", richardson);
  std::printf("cubature    %.15f\n", fracsob::cstar_oracle());
  std::printf("closed form %.15f\n", closed);
  return std::abs(simpson - closed) < 1e-10 && std::abs(fracsob::cstar_oracle() - closed) < 1e-9 ? 0 : 1;
}
