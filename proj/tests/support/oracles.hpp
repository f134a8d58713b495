#pragma once

// Independent reference computations used by the test suites. Nothing here
// calls into the library's numeric code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Fn = std::function<double(double)>;

namespace detail {

inline double simpson(double fa, double fm, double fb, double a, double b) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive(const Fn& f, double a, double b, double fa, double fm, double fb,
                       double whole, double tol, double floor, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(fa, flm, fm, a, m);
  const double right = simpson(fm, frm, fb, m, b);
  const double delta = left + right - whole;
  // past the floor the tolerance is finer than rounding noise
  if (depth <= 0 || tol < floor || std::fabs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, floor, depth - 1) +
         adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, floor, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b]. The range is cut into
/// `panels` pieces first so a narrow peak cannot hide between the first
/// three samples. `tol` is relative to a coarse first estimate, so tiny
/// integrals (deep gamma tails) get the same number of digits.
inline double integrate(const Fn& f, double a, double b, double tol = 1e-12, int depth = 40,
                        int panels = 64) {
  if (b <= a) return 0.0;
  const double w = (b - a) / panels;
  struct Panel {
    double lo, hi, fa, fm, fb, whole;
  };
  std::vector<Panel> ps;
  double coarse = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double lo = a + i * w;
    const double hi = i + 1 == panels ? b : lo + w;
    Panel p{lo, hi, f(lo), f(0.5 * (lo + hi)), f(hi), 0.0};
    p.whole = detail::simpson(p.fa, p.fm, p.fb, lo, hi);
    coarse += std::fabs(p.whole);
    ps.push_back(p);
  }
  const double scale = coarse > 0.0 ? coarse : 1.0;
  double sum = 0.0;
  for (const auto& p : ps) {
    sum += detail::adaptive(f, p.lo, p.hi, p.fa, p.fm, p.fb, p.whole, tol * scale / panels,
                            1e-17 * scale, depth);
  }
  return sum;
}

/// Central finite differences of order 1..3 with step h.
inline double derivative(const Fn& f, double x, int order, double h) {
  switch (order) {
    case 1:
      return (f(x + h) - f(x - h)) / (2.0 * h);
    case 2:
      return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    case 3:
      return (f(x + 2 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2 * h)) / (2.0 * h * h * h);
  }
  throw std::invalid_argument("derivative order must be 1, 2 or 3");
}

/// Scans g from lo in steps of `step` for the first sign change, then
/// bisects it down to `tol`.
inline std::optional<double> first_root(const Fn& g, double lo, double hi, double step,
                                        double tol = 1e-6) {
  double a = lo;
  double ga = g(a);
  for (double b = lo + step; b <= hi; b += step) {
    const double gb = g(b);
    if ((ga > 0) != (gb > 0)) {
      double l = a, r = b, gl = ga;
      while (r - l > tol) {
        const double m = 0.5 * (l + r);
        const double gm = g(m);
        if ((gm > 0) == (gl > 0)) {
          l = m;
          gl = gm;
        } else {
          r = m;
        }
      }
      return 0.5 * (l + r);
    }
    a = b;
    ga = gb;
  }
  return std::nullopt;
}

/// p +- 3 sigma of a binomial proportion over n draws.
inline std::pair<double, double> binomial_3sigma(double p, std::size_t n) {
  const double s = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  return {p - s, p + s};
}

/// Column scan of a detection matrix: detected[tool][file]. Returns, per
/// tool, the files in `cohort` only that tool detected.
inline std::vector<std::size_t> unique_by_scan(const std::vector<std::vector<bool>>& detected,
                                               const std::vector<bool>& cohort) {
  std::vector<std::size_t> out(detected.size(), 0);
  const std::size_t files = cohort.size();
  for (std::size_t f = 0; f < files; ++f) {
    if (!cohort[f]) continue;
    int hits = 0;
    std::size_t who = 0;
    for (std::size_t t = 0; t < detected.size(); ++t) {
      if (detected[t][f]) {
        ++hits;
        who = t;
      }
    }
    if (hits == 1) ++out[who];
  }
  return out;
}

/// Strict-FIFO counting semaphore with per-class queues: the head of a
/// queue blocks everyone behind it. Used as the reference model for the
/// warden.
class FifoModel {
 public:
  explicit FifoModel(std::map<std::string, int> limits) : limits_(std::move(limits)) {
    for (const auto& [k, v] : limits_) held_[k] = 0;
  }

  /// Queues a request and returns its id.
  int request(const std::string& cls, int n) {
    const int id = next_++;
    queue_[cls].push_back({id, n});
    pump(cls);
    return id;
  }

  void cancel(int id) {
    for (auto& [cls, q] : queue_) {
      for (auto it = q.begin(); it != q.end(); ++it) {
        if (it->first == id) {
          q.erase(it);
          pump(cls);
          return;
        }
      }
    }
  }

  void release(const std::string& cls, int n) {
    held_[cls] -= n;
    if (held_[cls] < 0) throw std::logic_error("model over-release");
    pump(cls);
  }

  bool granted(int id) const { return granted_.contains(id); }
  int held(const std::string& cls) const { return held_.at(cls); }
  std::size_t waiting(const std::string& cls) const {
    auto it = queue_.find(cls);
    return it == queue_.end() ? 0 : it->second.size();
  }
  /// Grant order so far.
  const std::vector<int>& order() const { return order_; }

 private:
  void pump(const std::string& cls) {
    auto& q = queue_[cls];
    while (!q.empty() && held_[cls] + q.front().second <= limits_.at(cls)) {
      held_[cls] += q.front().second;
      granted_.insert(q.front().first);
      order_.push_back(q.front().first);
      q.pop_front();
    }
  }

  std::map<std::string, int> limits_;
  std::map<std::string, int> held_;
  std::map<std::string, std::deque<std::pair<int, int>>> queue_;
  std::set<int> granted_;
  std::vector<int> order_;
  int next_ = 0;
};

/// Replays permit grant/release deltas in log order and reports the highest
/// occupancy seen per class, and whether any release went negative.
struct PermitReplay {
  std::map<std::string, int> held;
  std::map<std::string, int> peak;
  bool negative = false;

  void grant(const std::string& cls, int n) {
    held[cls] += n;
    peak[cls] = std::max(peak[cls], held[cls]);
  }
  void release(const std::string& cls, int n) {
    held[cls] -= n;
    if (held[cls] < 0) negative = true;
  }
};

}  // namespace oracle
