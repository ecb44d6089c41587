#include "fracsob/numerics.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <string>

#include "fracsob/rng.hpp"

namespace fracsob {

GaussRule gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  GaussRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (order == 1) p0 = 1.0;
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t mid = xs.size() / 2;
  return pairwise_sum(xs.first(mid)) + pairwise_sum(xs.subspan(mid));
}

double Moments::std_error() const {
  if (count < 2) return 0.0;
  const double n = static_cast<double>(count);
  const double m = sum / n;
  const double var = std::max(0.0, (sum_sq / n - m * m)) * n / (n - 1.0);
  return std::sqrt(var / n);
}

Moments reduce_moments(std::span<const Moments> parts) {
  std::vector<double> s, q;
  s.reserve(parts.size());
  q.reserve(parts.size());
  Moments out;
  for (const auto& p : parts) {
    s.push_back(p.sum);
    q.push_back(p.sum_sq);
    out.count += p.count;
  }
  out.sum = pairwise_sum(s);
  out.sum_sq = pairwise_sum(q);
  return out;
}

namespace {

int initial_threads() {
  if (const char* env = std::getenv("FRACSOB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> n{initial_threads()};
  return n;
}

// Gauss-Kronrod (7, 15) on [-1, 1].
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Region {
  std::vector<double> center;
  std::vector<double> half;
  double value = 0.0;
  double error = 0.0;
  int split_dim = 0;
  bool operator<(const Region& o) const { return error < o.error; }
};

class RuleEvaluator {
 public:
  RuleEvaluator(const ScalarIntegrand& f, std::size_t dim) : f_(f), dim_(dim), x_(dim) {
    const double d = static_cast<double>(dim);
    w1_ = (12824.0 - 9120.0 * d + 400.0 * d * d) / 19683.0;
    w2_ = 980.0 / 6561.0;
    w3_ = (1820.0 - 400.0 * d) / 19683.0;
    w4_ = 200.0 / 19683.0;
    w5_ = 6859.0 / 19683.0 / std::ldexp(1.0, static_cast<int>(dim));
    e1_ = (729.0 - 950.0 * d + 50.0 * d * d) / 729.0;
    e2_ = 245.0 / 486.0;
    e3_ = (265.0 - 100.0 * d) / 1458.0;
    e4_ = 25.0 / 729.0;
  }

  std::size_t evals_per_region() const {
    if (dim_ == 1) return 15;
    return (std::size_t{1} << dim_) + 2 * dim_ * dim_ + 2 * dim_ + 1;
  }

  void evaluate(Region& r) { dim_ == 1 ? evaluate_1d(r) : evaluate_gm(r); }

 private:
  double eval_at() { return f_(std::span<const double>(x_)); }

  void evaluate_1d(Region& r) {
    const double c = r.center[0], h = r.half[0];
    x_[0] = c;
    const double fc = eval_at();
    double kron = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
      x_[0] = c - h * kXgk[j];
      const double a = eval_at();
      x_[0] = c + h * kXgk[j];
      const double b = eval_at();
      kron += kWgk[j] * (a + b);
      if (j % 2 == 1) gauss += kWg[j / 2] * (a + b);
    }
    r.value = kron * h;
    r.error = std::abs((kron - gauss) * h);
    r.split_dim = 0;
  }

  void evaluate_gm(Region& r) {
    constexpr double l2 = 0.35856858280031809199;  // sqrt(9/70)
    constexpr double l4 = 0.94868329805051379960;  // sqrt(9/10)
    constexpr double l5 = 0.68824720161168529772;  // sqrt(9/19)
    constexpr double ratio = (l2 * l2) / (l4 * l4);
    const std::size_t d = dim_;
    double vol = 1.0;
    for (std::size_t i = 0; i < d; ++i) vol *= 2.0 * r.half[i];

    std::copy(r.center.begin(), r.center.end(), x_.begin());
    const double f0 = eval_at();
    double sum2 = 0.0, sum3 = 0.0, sum4 = 0.0, sum5 = 0.0;
    double best_diff = -1.0;
    int best_dim = 0;
    for (std::size_t i = 0; i < d; ++i) {
      x_[i] = r.center[i] - l2 * r.half[i];
      const double a2 = eval_at();
      x_[i] = r.center[i] + l2 * r.half[i];
      const double b2 = eval_at();
      x_[i] = r.center[i] - l4 * r.half[i];
      const double a4 = eval_at();
      x_[i] = r.center[i] + l4 * r.half[i];
      const double b4 = eval_at();
      x_[i] = r.center[i];
      sum2 += a2 + b2;
      sum3 += a4 + b4;
      const double diff = std::abs(a2 + b2 - 2.0 * f0 - ratio * (a4 + b4 - 2.0 * f0));
      const bool clearly_larger = diff > best_diff * (1.0 + 1e-10) + 1e-300;
      const bool tie_wider = std::abs(diff - best_diff) <= 1e-10 * std::max(diff, best_diff) &&
                             r.half[i] > r.half[best_dim];
      if (best_diff < 0.0 || clearly_larger || tie_wider) {
        best_diff = diff;
        best_dim = static_cast<int>(i);
      }
    }
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = i + 1; k < d; ++k) {
        for (int si = -1; si <= 1; si += 2) {
          for (int sk = -1; sk <= 1; sk += 2) {
            x_[i] = r.center[i] + si * l4 * r.half[i];
            x_[k] = r.center[k] + sk * l4 * r.half[k];
            sum4 += eval_at();
          }
        }
        x_[i] = r.center[i];
        x_[k] = r.center[k];
      }
    }
    const std::size_t corners = std::size_t{1} << d;
    for (std::size_t mask = 0; mask < corners; ++mask) {
      for (std::size_t i = 0; i < d; ++i)
        x_[i] = r.center[i] + ((mask >> i) & 1 ? l5 : -l5) * r.half[i];
      sum5 += eval_at();
    }
    const double deg7 = vol * (w1_ * f0 + w2_ * sum2 + w3_ * sum3 + w4_ * sum4 + w5_ * sum5);
    const double deg5 = vol * (e1_ * f0 + e2_ * sum2 + e3_ * sum3 + e4_ * sum4);
    r.value = deg7;
    r.error = std::abs(deg7 - deg5);
    r.split_dim = best_dim;
  }

  const ScalarIntegrand& f_;
  std::size_t dim_;
  std::vector<double> x_;
  double w1_, w2_, w3_, w4_, w5_, e1_, e2_, e3_, e4_;
};

}  // namespace

int worker_threads() { return thread_setting().load(); }
void set_worker_threads(int n) { thread_setting() = n < 1 ? 1 : n; }

CubatureResult adaptive_cubature(const ScalarIntegrand& f, std::span<const double> lo,
                                 std::span<const double> hi, const CubatureOptions& opts) {
  if (lo.size() != hi.size() || lo.empty()) throw std::invalid_argument("adaptive_cubature: bad box");
  const std::size_t d = lo.size();
  RuleEvaluator rule(f, d);
  Region root;
  root.center.resize(d);
  root.half.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    root.center[i] = 0.5 * (lo[i] + hi[i]);
    root.half[i] = 0.5 * (hi[i] - lo[i]);
  }
  CubatureResult res;
  rule.evaluate(root);
  res.evals = rule.evals_per_region();
  std::priority_queue<Region> heap;
  double value = root.value, error = root.error;
  heap.push(std::move(root));
  while (true) {
    const double target = std::max(opts.abs_tol, opts.rel_tol * std::abs(value));
    if (error <= target) {
      res.converged = true;
      break;
    }
    if (res.evals + 2 * rule.evals_per_region() > opts.max_evals) break;
    Region worst = heap.top();
    heap.pop();
    Region a = worst, b = worst;
    const int s = worst.split_dim;
    a.half[s] = b.half[s] = 0.5 * worst.half[s];
    a.center[s] = worst.center[s] - a.half[s];
    b.center[s] = worst.center[s] + b.half[s];
    rule.evaluate(a);
    rule.evaluate(b);
    res.evals += 2 * rule.evals_per_region();
    value += a.value + b.value - worst.value;
    error += a.error + b.error - worst.error;
    heap.push(std::move(a));
    heap.push(std::move(b));
  }
  // Recompute the totals from the leaves to shed accumulated cancellation.
  std::vector<double> vals, errs;
  vals.reserve(heap.size());
  errs.reserve(heap.size());
  while (!heap.empty()) {
    vals.push_back(heap.top().value);
    errs.push_back(heap.top().error);
    heap.pop();
  }
  res.value = pairwise_sum(vals);
  res.error = pairwise_sum(errs);
  if (!res.converged) res.converged = res.error <= std::max(opts.abs_tol, opts.rel_tol * std::abs(res.value));
  return res;
}

McResult monte_carlo(std::uint64_t samples, std::uint64_t seed, std::string_view tag,
                     const std::function<double(Rng&, std::uint64_t)>& body) {
  const std::uint64_t chunks = (samples + kChunkSize - 1) / kChunkSize;
  const std::string tag_copy(tag);
  const auto parts = run_chunks<McResult>(chunks, [&](std::size_t c) {
    Rng rng(seed, tag_copy, c);
    McResult r;
    const std::uint64_t begin = c * kChunkSize, end = std::min(samples, begin + kChunkSize);
    for (std::uint64_t i = begin; i < end; ++i) {
      const double w = body(rng, i);
      if (std::isnan(w)) {
        ++r.skipped;
        r.moments.add(0.0);
      } else {
        r.moments.add(w);
      }
    }
    return r;
  });
  std::vector<Moments> ms;
  McResult out;
  for (const auto& p : parts) {
    ms.push_back(p.moments);
    out.skipped += p.skipped;
  }
  out.moments = reduce_moments(ms);
  return out;
}

}  // namespace fracsob
