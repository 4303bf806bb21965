#include "ccm/rng.hpp"

#include "ccm/math.hpp"

namespace ccm {

double Rng::gamma(double shape, double scale) {
  // Marsaglia-Tsang squeeze; boosted for shape < 1.
  if (shape < 1.0) {
    const double u = uniform_pos();
    return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

long Rng::poisson(double lambda) {
  if (lambda <= 0.0) return 0;
  if (lambda < 10.0) {
    // Inversion by sequential search.
    const double l = std::exp(-lambda);
    double p = 1.0;
    long k = -1;
    do {
      ++k;
      p *= uniform_pos();
    } while (p > l);
    return k;
  }
  // Hörmann's PTRS transformed rejection for large rates.
  const double b = 0.931 + 2.53 * std::sqrt(lambda);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_lambda = std::log(lambda);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform_pos();
    double us = 0.5 - std::fabs(u);
    double kd = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long>(kd);
    if (kd < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        kd * log_lambda - lambda - lgamma_safe(kd + 1.0)) {
      return static_cast<long>(kd);
    }
  }
}

}  // namespace ccm
