#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ccm {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Thread-safe lgamma (std::lgamma writes the global signgam).
double lgamma_safe(double x);
double digamma(double x);

inline double log_sum_exp(double a, double b) {
  if (std::isinf(a) && a < 0) return b;
  if (std::isinf(b) && b < 0) return a;
  double m = a > b ? a : b;
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}
double log_sum_exp(std::span<const double> xs);

// log(1 + e^x) without overflow.
inline double log1p_exp(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

double mean(std::span<const double> xs);
// Sample standard deviation (n-1 denominator).
double sd(std::span<const double> xs);
double variance(std::span<const double> xs);

// Nearest-rank percentile: smallest value with cumulative proportion >= p.
double percentile_nearest_rank(std::vector<double> xs, double p);

// Central interval [lo, hi] with total mass `level` (nearest-rank on both tails).
std::pair<double, double> central_interval(std::vector<double> xs, double level);

double median(std::vector<double> xs);

// Standard normal CDF and its inverse (Acklam's rational approximation,
// polished with one Halley step; |err| < 1e-13 over (0,1)).
double std_normal_cdf(double x);
double inv_std_normal_cdf(double p);

// FNV-1a 64-bit, used for input digests in run manifests.
std::uint64_t fnv1a64(std::span<const char> bytes);
std::string fnv1a64_hex(const std::string& bytes);

// Shortest round-trip double formatting ("%.17g" fallback).
std::string format_double(double v);

}  // namespace ccm
