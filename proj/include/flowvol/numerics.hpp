#ifndef FLOWVOL_NUMERICS_HPP_
#define FLOWVOL_NUMERICS_HPP_

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace flowvol {

/// Error taxonomy shared by all modules.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PoleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TopologyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Global worker cap, set once by the CLI (--threads); defaults to hardware.
inline int& max_threads() {
  static int n = static_cast<int>(std::thread::hardware_concurrency());
  return n;
}

struct KahanSum {
  double s = 0.0;
  double c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  double value() const { return s; }
};

/// Chunked compensated map-reduce over [0, n). The chunk partition and the
/// final combine order are fixed, so the result is independent of the number
/// of workers (beyond one ulp-level compensation, ~1e-16 relative).
inline double parallel_sum(std::int64_t n, const std::function<double(std::int64_t)>& f,
                           std::int64_t chunk = 4096) {
  if (n <= 0) return 0.0;
  const std::int64_t nchunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(static_cast<std::size_t>(nchunks), 0.0);
  int workers = std::max(1, std::min<int>(max_threads(), static_cast<int>(nchunks)));
  if (workers == 1) {
    for (std::int64_t cix = 0; cix < nchunks; ++cix) {
      KahanSum ks;
      const std::int64_t lo = cix * chunk, hi = std::min(n, lo + chunk);
      for (std::int64_t i = lo; i < hi; ++i) ks.add(f(i));
      partial[static_cast<std::size_t>(cix)] = ks.value();
    }
  } else {
    std::atomic<std::int64_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::int64_t cix = next.fetch_add(1);
        if (cix >= nchunks) return;
        KahanSum ks;
        const std::int64_t lo = cix * chunk, hi = std::min(n, lo + chunk);
        for (std::int64_t i = lo; i < hi; ++i) ks.add(f(i));
        partial[static_cast<std::size_t>(cix)] = ks.value();
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  KahanSum total;
  for (double p : partial) total.add(p);
  return total.value();
}

/// Run f(i) for i in [0, n) on the worker pool. No reduction; f must be
/// safe to call concurrently for distinct i.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& f) {
  if (n <= 0) return;
  int workers = std::max(1, std::min<int>(max_threads(), static_cast<int>(n)));
  if (workers == 1) {
    for (std::int64_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= n) return;
      f(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

/// Deterministic RNG wrapper. Gaussian deviates use the Marsaglia polar
/// algorithm rather than std::normal_distribution so that streams are
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // [0, 1)
    return (eng_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, q;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double g = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * g;
    have_spare_ = true;
    return u * g;
  }

  std::uint64_t integer() { return eng_(); }

  /// Independent substream for a named task; keeps experiment components
  /// decoupled from evaluation order.
  Rng fork(std::uint64_t tag) {
    return Rng(eng_() ^ (0x9e3779b97f4a7c15ull * (tag + 1)));
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// C2 smoothstep on [0,1]; clamps outside.
inline double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double max_rel_residual = 0.0;  // of fitted values vs data
};

/// Least-squares line through (x_i, y_i).
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ParameterError("fit_line: need >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fit = f.slope * x[i] + f.intercept;
    const double denom = std::max(std::abs(y[i]), 1e-300);
    f.max_rel_residual = std::max(f.max_rel_residual, std::abs(fit - y[i]) / denom);
  }
  return f;
}

/// log-log power-law fit  v = C r^p  ->  returns p and C.
inline LineFit fit_power_law(const std::vector<double>& r, const std::vector<double>& v) {
  std::vector<double> lx(r.size()), ly(v.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] <= 0.0 || v[i] <= 0.0) throw ParameterError("fit_power_law: needs positive data");
    lx[i] = std::log(r[i]);
    ly[i] = std::log(v[i]);
  }
  return fit_line(lx, ly);
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr m;
  m.n = xs.size();
  if (m.n == 0) return m;
  KahanSum s;
  for (double x : xs) s.add(x);
  m.mean = s.value() / static_cast<double>(m.n);
  if (m.n < 2) return m;
  KahanSum v;
  for (double x : xs) v.add((x - m.mean) * (x - m.mean));
  m.stderr_ = std::sqrt(v.value() / (static_cast<double>(m.n) * static_cast<double>(m.n - 1)));
  return m;
}

}  // namespace flowvol

#endif  // FLOWVOL_NUMERICS_HPP_
