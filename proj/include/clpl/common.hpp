#pragma once

// Shared primitives: error taxonomy, log-space arithmetic, a dense row-major
// matrix, FNV-1a hashing and deterministic seeded RNG substreams.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace clpl {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Error taxonomy. The CLI maps each family to a distinct exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  int line;
  ParseError(const std::string& msg, int line_no)
      : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"),
        line(line_no) {}
};
struct InvalidArgument : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Target cannot be aligned within the available frames.
struct InfeasibleTarget : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Non-finite gradients; carries the offending utterance id in the message.
struct DivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoPseudoLabels : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UndefinedPerplexity : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_sum_exp(double a, double b, double c) {
  return log_sum_exp(log_sum_exp(a, b), c);
}

// Two-pass reduction; summation order follows the input order so results are
// identical across runs.
inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(size_t(r) * c, fill) {}

  double& operator()(int r, int c) { return data[size_t(r) * cols + c]; }
  double operator()(int r, int c) const { return data[size_t(r) * cols + c]; }
  std::span<double> row(int r) { return {data.data() + size_t(r) * cols, size_t(cols)}; }
  std::span<const double> row(int r) const {
    return {data.data() + size_t(r) * cols, size_t(cols)};
  }
  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Hashing

constexpr uint64_t kFnvOffset = 1469598103934665603ull;
constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a64_u64(uint64_t v, uint64_t h = kFnvOffset) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
  return h;
}

inline std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// RNG. mt19937_64 plus hand-rolled draw helpers so that streams are
// bit-reproducible across standard libraries (std distributions are not).

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t u64() { return eng_(); }

  // Uniform in [0, n) by rejection sampling.
  uint64_t below(uint64_t n) {
    require(n > 0, "Rng::below: n must be positive");
    uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
    uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return v % n;
  }

  int range(int lo, int hi) {  // inclusive bounds
    require(hi >= lo, "Rng::range: hi < lo");
    return lo + static_cast<int>(below(uint64_t(hi) - lo + 1));
  }

  // Uniform in [0, 1).
  double real() { return double(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

  bool bernoulli(double p) { return real() < p; }

  // Box-Muller, one value per call (the spare is cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = (double((eng_() >> 11)) + 1.0) * 0x1.0p-53;  // in (0, 1]
    double u2 = real();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// All randomness flows from one root seed through named substreams.
inline uint64_t substream_seed(uint64_t root, std::string_view name, uint64_t index = 0) {
  uint64_t h = fnv1a64_u64(root);
  h = fnv1a64(name, h);
  h = fnv1a64_u64(index, h);
  return h;
}

inline Rng substream(uint64_t root, std::string_view name, uint64_t index = 0) {
  return Rng(substream_seed(root, name, index));
}

// Fixed-precision float formatting for text artifacts (deterministic).
inline std::string format_double(double v, const char* fmt = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return std::string(buf);
}

// Work-stealing loop over [0, n). Each index must be independent; results
// written by index stay order-independent, so workers > 1 cannot change them.
template <typename F>
void parallel_for(int n, int workers, F&& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  int k = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(size_t(k));
  for (int w = 0; w < k; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> g(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace clpl
