#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace ccm {

// Counter-based Philox4x32-10 generator. Streams keyed by (seed, stream) are
// statistically independent, so per-chain draws do not depend on thread
// scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    key_[0] = static_cast<std::uint32_t>(seed);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    ctr_ = {0u, 0u, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  }

  std::uint32_t next_u32() {
    if (idx_ == 4) refill();
    return out_[idx_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  // Uniform in (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double t = 2.0 * M_PI * uniform();
    cached_ = r * std::sin(t);
    have_cached_ = true;
    return r * std::cos(t);
  }

  double exponential() { return -std::log(uniform_pos()); }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // Rejection to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  double gamma(double shape, double scale);
  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
  }
  double weibull(double shape, double scale) {
    return scale * std::pow(-std::log(uniform_pos()), 1.0 / shape);
  }
  long poisson(double lambda);
  // Negative binomial with mean mu and shape phi (gamma-Poisson mixture).
  long neg_binomial(double mu, double phi) {
    const double lam = gamma(phi, mu / phi);
    return poisson(lam);
  }

 private:
  static std::uint32_t mulhi(std::uint32_t a, std::uint32_t b, std::uint32_t* lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    *lo = static_cast<std::uint32_t>(p);
    return static_cast<std::uint32_t>(p >> 32);
  }

  void refill() {
    std::array<std::uint32_t, 4> c = ctr_;
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      std::uint32_t lo0, lo1;
      const std::uint32_t hi0 = mulhi(0xD2511F53u, c[0], &lo0);
      const std::uint32_t hi1 = mulhi(0xCD9E8D57u, c[2], &lo1);
      c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    out_ = c;
    idx_ = 0;
    if (++ctr_[0] == 0) ++ctr_[1];
  }

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> ctr_{};
  std::array<std::uint32_t, 4> out_{};
  int idx_ = 4;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace ccm
