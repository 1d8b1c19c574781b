#pragma once

#include <cmath>
#include <cstdint>

namespace hdgnn {

// Counter-based SplitMix64 generator. A stream is identified by a 64-bit key;
// substream(seed, a, b) derives independent streams for distinct (a, b), so
// per-node / per-walk sampling does not depend on execution order.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : state_(key) {}

  static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t k = mix(seed + 0x9e3779b97f4a7c15ull);
    k = mix(k ^ mix(a + 0xbf58476d1ce4e5b9ull));
    k = mix(k ^ mix(b + 0x94d049bb133111ebull));
    return Rng(k);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Box-Muller; computes a fresh pair each call and discards the second
  // member so the stream stays a pure function of the draw count.
  double gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double lognormal(double mu, double sigma) { return std::exp(mu + sigma * gaussian()); }

  // Pareto with scale x_m and tail exponent alpha.
  double pareto(double x_m, double alpha) {
    double u = next_double();
    while (u <= 0.0) u = next_double();
    return x_m * std::pow(u, -1.0 / alpha);
  }

  double exponential(double rate) {
    double u = next_double();
    while (u <= 0.0) u = next_double();
    return -std::log(u) / rate;
  }

  // Knuth's method; fine for the small means the generator uses.
  int poisson(double mean) {
    double limit = std::exp(-mean);
    double prod = next_double();
    int n = 0;
    while (prod > limit) {
      ++n;
      prod *= next_double();
    }
    return n;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace hdgnn
