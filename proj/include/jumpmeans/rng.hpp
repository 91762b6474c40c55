#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace jumpmeans {

// All sampling is built on the raw 64-bit stream of mt19937_64 with
// hand-rolled transforms, so generated datasets are identical across
// standard library implementations. The stream name recorded in file
// headers must change if any transform below changes.
inline constexpr const char* kPrngName = "mt19937_64-substream-v1";

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream derived from (seed, stream index). Stream 0 is used
  // for parameter draws, stream 1+i for sequence i, so per-sequence output
  // is invariant to generation order and worker count.
  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x5851F42D4C957F2DULL)));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double exponential(double rate) {
    if (!(rate > 0)) throw std::invalid_argument("exponential: rate must be positive");
    return -std::log1p(-uniform()) / rate;
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    // Marsaglia polar method; caches the spare deviate.
    if (have_spare_) {
      have_spare_ = false;
      return mean + sd * spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return mean + sd * u * f;
  }

  // Marsaglia-Tsang for shape >= 1, boosted for shape < 1. rate is the
  // inverse scale, so mean = shape / rate.
  double gamma(double shape, double rate) {
    if (!(shape > 0) || !(rate > 0))
      throw std::invalid_argument("gamma: shape and rate must be positive");
    if (shape < 1.0) {
      double u = uniform();
      while (u <= 0.0) u = uniform();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  // Index in [0, probs.size()) with probability proportional to probs.
  int categorical(const std::vector<double>& probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    if (!(total > 0)) throw std::invalid_argument("categorical: no positive mass");
    double u = uniform() * total;
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  std::vector<double> dirichlet(double concentration, std::size_t n) {
    std::vector<double> out(n);
    double total = 0.0;
    for (auto& v : out) {
      v = gamma(concentration, 1.0);
      total += v;
    }
    for (auto& v : out) v /= total;
    return out;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace jumpmeans
