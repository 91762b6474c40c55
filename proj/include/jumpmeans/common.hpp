#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace jumpmeans {

inline constexpr double kProbFloor = 1e-12;
inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Error taxonomy mirrored by the CLI exit codes (2 = data, 3 = numerical).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// log with a floor so objectives stay finite while preserving ordering.
// Structural zeros (e.g. the diagonal of a transition matrix) must be
// handled by the caller; this is only for probabilities that may underflow.
inline double floored_log(double p, double floor = kProbFloor) {
  return std::log(std::max(p, floor));
}

// Worker cap: JUMPMEANS_THREADS > 0 pins the count, 0 or unset means auto.
inline int worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("JUMPMEANS_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && end && *end == '\0' && v > 0)
      return static_cast<int>(std::min<long>(v, 256));
  }
  return static_cast<int>(std::min(hw, 64u));
}

// FNV-1a over raw bytes. Used both for file digests and for the in-memory
// parameter fingerprints recorded in fit traces.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 1469598103934665603ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

// Incremental fingerprint builder over mixed scalar streams. Doubles are
// hashed by bit pattern, so two parameter sets collide only if they are
// bitwise identical (modulo FNV collisions).
struct Fingerprint {
  std::uint64_t h = 1469598103934665603ull;
  void add_bytes(const void* data, std::size_t len) { h = fnv1a64(data, len, h); }
  void add(double v) {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof v);
    std::memcpy(&bits, &v, sizeof bits);
    add_bytes(&bits, sizeof bits);
  }
  void add(std::uint64_t v) { add_bytes(&v, sizeof v); }
  void add(int v) { add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
  void add(const std::vector<double>& vs) {
    add(static_cast<std::uint64_t>(vs.size()));
    for (double v : vs) add(v);
  }
  void add(const std::vector<std::vector<double>>& m) {
    add(static_cast<std::uint64_t>(m.size()));
    for (const auto& row : m) add(row);
  }
};

// Chunked parallel loop over [0, n). The body receives disjoint index ranges;
// results must be written to per-index slots so the outcome is independent of
// scheduling. Falls back to inline execution for small n or one worker.
inline void parallel_for(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& body,
                         std::size_t min_chunk = 64) {
  int workers = worker_count();
  if (workers <= 1 || n < 2 * min_chunk) {
    if (n > 0) body(0, n);
    return;
  }
  std::size_t chunks = std::min<std::size_t>(workers, (n + min_chunk - 1) / min_chunk);
  std::size_t per = (n + chunks - 1) / chunks;
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  for (std::size_t c = 0; c < chunks; ++c) {
    std::size_t b = c * per, e = std::min(n, b + per);
    if (b >= e) break;
    pool.emplace_back([&, b, e] {
      try {
        body(b, e);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace jumpmeans
