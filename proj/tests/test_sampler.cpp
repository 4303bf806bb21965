#include "doctest.h"

#include <cmath>

#include "ccm/math.hpp"
#include "ccm/rng.hpp"
#include "ccm/sampler.hpp"

using namespace ccm;

namespace {

LogProbGrad std_normal_density(int dim) {
  return [dim](const std::vector<double>& q, double& logp, std::vector<double>& grad) {
    grad.resize(dim);
    logp = 0.0;
    for (int i = 0; i < dim; ++i) {
      logp -= 0.5 * q[i] * q[i];
      grad[i] = -q[i];
    }
    return true;
  };
}

// 2-d Gaussian with correlation rho.
LogProbGrad correlated_density(double rho) {
  const double det = 1.0 - rho * rho;
  return [rho, det](const std::vector<double>& q, double& logp, std::vector<double>& grad) {
    grad.resize(2);
    const double a = q[0], b = q[1];
    logp = -(a * a - 2.0 * rho * a * b + b * b) / (2.0 * det);
    grad[0] = -(a - rho * b) / det;
    grad[1] = -(b - rho * a) / det;
    return true;
  };
}

// Neal's funnel (centered): v ~ N(0,3), x_i ~ N(0, exp(v/2)), 9 x-dims.
LogProbGrad funnel_density() {
  return [](const std::vector<double>& q, double& logp, std::vector<double>& grad) {
    const int d = static_cast<int>(q.size());
    grad.assign(d, 0.0);
    const double v = q[0];
    logp = -v * v / 18.0;
    grad[0] = -v / 9.0;
    const double inv_var = std::exp(-v);
    for (int i = 1; i < d; ++i) {
      logp -= 0.5 * q[i] * q[i] * inv_var + 0.5 * v;
      grad[i] = -q[i] * inv_var;
      grad[0] += 0.5 * q[i] * q[i] * inv_var - 0.5;
    }
    return std::isfinite(logp);
  };
}

}  // namespace

TEST_CASE("leapfrog reverses under momentum negation") {
  auto f = std_normal_density(3);
  std::vector<double> q = {0.3, -1.0, 0.8}, p = {0.5, 0.2, -0.7};
  std::vector<double> inv_mass = {1.0, 2.0, 0.5};
  std::vector<double> grad(3);
  double logp;
  f(q, logp, grad);
  const auto q0 = q;
  for (int s = 0; s < 25; ++s) REQUIRE(leapfrog(f, q, p, logp, grad, 0.05, inv_mass, 1));
  for (auto& pi : p) pi = -pi;
  for (int s = 0; s < 25; ++s) REQUIRE(leapfrog(f, q, p, logp, grad, 0.05, inv_mass, 1));
  for (int i = 0; i < 3; ++i) CHECK(q[i] == doctest::Approx(q0[i]).epsilon(1e-10));
}

TEST_CASE("leapfrog with zero momentum and zero gradient stays put") {
  LogProbGrad flat = [](const std::vector<double>&, double& logp, std::vector<double>& grad) {
    logp = 0.0;
    grad.assign(grad.size(), 0.0);
    return true;
  };
  std::vector<double> q = {1.0, 2.0}, p = {0.0, 0.0}, grad(2, 0.0), inv_mass(2, 1.0);
  double logp = 0.0;
  REQUIRE(leapfrog(flat, q, p, logp, grad, 0.3, inv_mass, 1));
  CHECK(q[0] == 1.0);
  CHECK(q[1] == 2.0);
}

TEST_CASE("leapfrog energy error scales as step squared") {
  auto f = std_normal_density(1);
  auto energy_error = [&](double eps) {
    std::vector<double> q = {1.0}, p = {0.7}, grad(1), inv_mass = {1.0};
    double logp;
    f(q, logp, grad);
    const double h0 = -logp + 0.5 * p[0] * p[0];
    const int steps = static_cast<int>(std::round(1.0 / eps));
    for (int s = 0; s < steps; ++s) REQUIRE(leapfrog(f, q, p, logp, grad, eps, inv_mass, 1));
    return std::fabs(-logp + 0.5 * p[0] * p[0] - h0);
  };
  const double e1 = energy_error(0.02);
  const double e2 = energy_error(0.01);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.35));
}

TEST_CASE("leapfrog preserves phase-space volume on a linear Hamiltonian") {
  // For the 1-d Gaussian both updates are linear in (q, p): the map's
  // determinant must be exactly 1.
  auto f = std_normal_density(1);
  std::vector<double> inv_mass = {1.0};
  auto map = [&](double q0, double p0, double& q1, double& p1) {
    std::vector<double> q = {q0}, p = {p0}, grad(1);
    double logp;
    f(q, logp, grad);
    REQUIRE(leapfrog(f, q, p, logp, grad, 0.3, inv_mass, 1));
    q1 = q[0];
    p1 = p[0];
  };
  double a, b, c, d;
  map(1.0, 0.0, a, c);
  map(0.0, 1.0, b, d);
  CHECK(a * d - b * c == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nuts transitions sample a standard normal") {
  auto f = std_normal_density(2);
  Rng rng(99, 1);
  std::vector<double> q = {0.0, 0.0}, grad(2), inv_mass = {1.0, 1.0};
  double logp;
  f(q, logp, grad);
  const int n = 10000;
  double sum0 = 0.0, sumsq0 = 0.0;
  for (int it = 0; it < n; ++it) {
    NutsStats stats;
    nuts_transition(f, q, logp, grad, 0.5, inv_mass, 10, 1000.0, rng, stats);
    sum0 += q[0];
    sumsq0 += q[0] * q[0];
  }
  const double m = sum0 / n;
  const double v = sumsq0 / n - m * m;
  // crude MCSE bound: sd/sqrt(n/20)
  CHECK(std::fabs(m) < 3.0 * std::sqrt(20.0 / n));
  CHECK(v == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("run_chains recovers a correlated Gaussian covariance") {
  ChainConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 500;
  cfg.samples = 5000;
  cfg.seed = 7;
  auto batch = run_chains([&](int) { return correlated_density(0.9); }, 2, cfg);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  int n = 0;
  for (const auto& chain : batch.chains) {
    for (const auto& d : chain.draws) {
      sxx += d[0] * d[0];
      syy += d[1] * d[1];
      sxy += d[0] * d[1];
      ++n;
    }
  }
  CHECK(sxx / n == doctest::Approx(1.0).epsilon(0.05));
  CHECK(syy / n == doctest::Approx(1.0).epsilon(0.05));
  CHECK(sxy / n == doctest::Approx(0.9).epsilon(0.05));
}

TEST_CASE("the funnel triggers the divergence detector") {
  ChainConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 400;
  cfg.samples = 400;
  cfg.seed = 11;
  auto batch = run_chains([&](int) { return funnel_density(); }, 10, cfg);
  int divergences = 0;
  for (const auto& chain : batch.chains) divergences += chain.n_divergent;
  CHECK(divergences > 0);
}

TEST_CASE("same seed gives bit-identical batches") {
  ChainConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 150;
  cfg.samples = 100;
  cfg.seed = 42;
  auto a = run_chains([&](int) { return std_normal_density(3); }, 3, cfg);
  auto b = run_chains([&](int) { return std_normal_density(3); }, 3, cfg);
  REQUIRE(a.chains.size() == b.chains.size());
  for (std::size_t c = 0; c < a.chains.size(); ++c) {
    REQUIRE(a.chains[c].draws == b.chains[c].draws);
    CHECK(a.chains[c].step_size == b.chains[c].step_size);
  }
  ChainConfig serial = cfg;
  serial.threads = 1;
  auto s = run_chains([&](int) { return std_normal_density(3); }, 3, serial);
  for (std::size_t c = 0; c < a.chains.size(); ++c)
    CHECK(a.chains[c].draws == s.chains[c].draws);
}

TEST_CASE("higher target accept adapts a smaller step size") {
  ChainConfig low;
  low.chains = 1;
  low.warmup = 500;
  low.samples = 10;
  low.seed = 5;
  low.target_accept = 0.8;
  ChainConfig high = low;
  high.target_accept = 0.99;
  auto a = run_chains([&](int) { return std_normal_density(5); }, 5, low);
  auto b = run_chains([&](int) { return std_normal_density(5); }, 5, high);
  CHECK(b.chains[0].step_size < a.chains[0].step_size);
}

TEST_CASE("stationarity: chains started at posterior draws keep the moments") {
  ChainConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 200;
  cfg.samples = 3000;
  cfg.seed = 13;
  Rng init_rng(1234);
  cfg.inits = {{init_rng.normal(), init_rng.normal()}, {init_rng.normal(), init_rng.normal()}};
  auto batch = run_chains([&](int) { return std_normal_density(2); }, 2, cfg);
  std::vector<double> pooled;
  for (const auto& chain : batch.chains)
    for (const auto& d : chain.draws) pooled.push_back(d[0]);
  CHECK(std::fabs(mean(pooled)) < 0.07);
  CHECK(variance(pooled) == doctest::Approx(1.0).epsilon(0.08));
}

TEST_CASE("split r-hat separates mixed from unmixed chains") {
  Rng rng(21);
  std::vector<std::vector<double>> same(2), apart(2);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 2000; ++i) {
      same[c].push_back(rng.normal());
      apart[c].push_back(rng.normal() + (c == 0 ? 0.0 : 3.0));
    }
  }
  CHECK(split_rhat(same).value < 1.01);
  CHECK(split_rhat(apart).value > 1.2);

  std::vector<std::vector<double>> constant(2, std::vector<double>(100, 2.5));
  auto d = split_rhat(constant);
  CHECK(d.value == 1.0);
  CHECK(d.degenerate);
}

TEST_CASE("ess matches iid and AR(1) references") {
  Rng rng(34);
  std::vector<std::vector<double>> iid(4), ar(4);
  const double phi = 0.9;
  for (int c = 0; c < 4; ++c) {
    double x = 0.0;
    for (int i = 0; i < 5000; ++i) {
      iid[c].push_back(rng.normal());
      x = phi * x + rng.normal();
      ar[c].push_back(x);
    }
  }
  const double n_total = 4 * 5000;
  CHECK(ess(iid).value == doctest::Approx(n_total).epsilon(0.10));
  const double expected = n_total * (1.0 - phi) / (1.0 + phi);
  CHECK(ess(ar).value == doctest::Approx(expected).epsilon(0.20));

  std::vector<std::vector<double>> constant(2, std::vector<double>(100, 1.0));
  auto d = ess(constant);
  CHECK(d.value == 0.0);
  CHECK(d.degenerate);
}
