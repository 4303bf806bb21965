#include "doctest.h"

#include <cmath>

#include "ccm/math.hpp"
#include "ccm/model.hpp"
#include "ccm/fit.hpp"
#include "ccm/predict.hpp"
#include "ccm/rng.hpp"

using namespace ccm;

namespace {

Dataset tiny_dataset(int n, int teams, int repos, std::uint64_t seed, ModelKind kind) {
  ModelSpec spec;
  spec.kind = kind;
  TruthConfig truth;
  truth.b0 = -1.5;
  truth.g0 = 0.8;
  truth.b_slopes = {0.4, 0.2, 0.3, 0.25};
  truth.g_slopes = {-0.2, -0.1, -0.15, -0.1};
  SimulationDesign design{teams, repos, n};
  return simulate_dataset(spec, truth, design, OutcomeKind::Introduced, seed).dataset;
}

std::vector<double> finite_difference(ModelEvaluator& ev, const std::vector<double>& params,
                                      double h = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto hi = params, lo = params;
    hi[i] += h;
    lo[i] -= h;
    const LogDensityValue vh = ev.value(hi);
    const LogDensityValue vl = ev.value(lo);
    REQUIRE(vh.finite);
    REQUIRE(vl.finite);
    g[i] = (vh.log_posterior - vl.log_posterior) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("zinb degenerate inflation") {
  CHECK(zinb_log_pmf(0, 2.0, 1.0, 1.0) == 0.0);
  CHECK(std::isinf(zinb_log_pmf(3, 2.0, 1.0, 1.0)));
}

TEST_CASE("zinb reduces to the geometric at xi=0, mu=1, phi=1") {
  for (long y = 0; y <= 12; ++y) {
    const double expect = -(static_cast<double>(y) + 1.0) * std::log(2.0);
    CHECK(zinb_log_pmf(y, 1.0, 1.0, 0.0) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("zinb hand evaluation at xi=0.2, mu=2, phi=1, y=0") {
  // 0.2 + 0.8 * (1/3)
  CHECK(zinb_log_pmf(0, 2.0, 1.0, 0.2) ==
        doctest::Approx(std::log(0.2 + 0.8 / 3.0)).epsilon(1e-12));
}

TEST_CASE("zinb pmf sums to one over the truncated support") {
  for (double mu : {0.1, 1.0, 10.0}) {
    for (double phi : {0.5, 1.0, 5.0}) {
      for (double xi : {0.0, 0.5, 0.9}) {
        double total = 0.0;
        for (long y = 0; y <= 4000; ++y) total += std::exp(zinb_log_pmf(y, mu, phi, xi));
        CHECK(total >= 1.0 - 1e-6);
        CHECK(total <= 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("zinb mean identity at xi=0") {
  for (double mu : {0.3, 2.0, 7.5}) {
    for (double phi : {0.7, 3.0}) {
      double m = 0.0;
      for (long y = 1; y <= 20000; ++y) m += y * std::exp(zinb_log_pmf(y, mu, phi, 0.0));
      CHECK(m == doctest::Approx(mu).epsilon(1e-6));
    }
  }
}

TEST_CASE("domain violations throw") {
  CHECK_THROWS_AS(zinb_log_pmf(0, -1.0, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(zinb_log_pmf(0, 1.0, 0.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(zinb_log_pmf(0, 1.0, 1.0, 1.5), std::invalid_argument);
}

TEST_CASE("out-of-range observation indices are rejected") {
  Dataset ds = tiny_dataset(30, 2, 2, 4, ModelKind::M0);
  ModelSpec spec;
  spec.kind = ModelKind::M0;
  ParamLayout layout = ParamLayout::make(spec, ds.n_teams(), ds.n_teamrepo());
  std::vector<double> params(layout.total, 0.0);
  ConstrainedDraw cd = constrain(layout, params);
  Observation obs = ds.observations[0];
  obs.team = 99;
  CHECK_THROWS_AS(linear_predictors(obs, cd, layout), std::out_of_range);
}

TEST_CASE("linear predictors: intercept-only collapses to population values") {
  Dataset ds = tiny_dataset(60, 2, 2, 5, ModelKind::M0);
  ModelSpec spec;
  spec.kind = ModelKind::M0;
  ParamLayout layout = ParamLayout::make(spec, ds.n_teams(), ds.n_teamrepo());
  std::vector<double> params(layout.total, 0.0);
  params[layout.b_pop] = -1.2;
  params[layout.g_pop] = 0.7;
  // z left at zero: all offsets vanish
  ConstrainedDraw cd = constrain(layout, params);
  LinearPredictors lp = linear_predictors(ds.observations[0], cd, layout);
  CHECK(lp.log_mu == doctest::Approx(-1.2));
  CHECK(lp.logit_xi == doctest::Approx(0.7));
}

TEST_CASE("linear predictors: M1 slope arithmetic") {
  Dataset ds = tiny_dataset(60, 2, 2, 6, ModelKind::M1);
  ModelSpec spec;
  spec.kind = ModelKind::M1;
  ParamLayout layout = ParamLayout::make(spec, ds.n_teams(), ds.n_teamrepo());
  std::vector<double> params(layout.total, 0.0);
  params[layout.b_pop] = -1.0;
  params[layout.b_pop + 1] = 0.3;  // slope on A
  ConstrainedDraw cd = constrain(layout, params);
  Observation obs = ds.observations[0];
  obs.x[0] = 2.0;
  obs.x[1] = 0.0;
  LinearPredictors lp = linear_predictors(obs, cd, layout);
  CHECK(lp.log_mu == doctest::Approx(-1.0 + 0.6));
}

TEST_CASE("M2 at predictor means is intercept-only") {
  Dataset ds = tiny_dataset(60, 2, 2, 7, ModelKind::M2);
  ModelSpec spec;
  spec.kind = ModelKind::M2;
  ParamLayout layout = ParamLayout::make(spec, ds.n_teams(), ds.n_teamrepo());
  Rng rng(3);
  std::vector<double> params(layout.total);
  for (auto& p : params) p = 0.3 * rng.normal();
  // zero the group z blocks so only population terms remain
  for (int blk = 0; blk < 4; ++blk)
    for (int k = 0; k < layout.group_count(blk % 2) * layout.n_varying; ++k)
      params[layout.z_off[blk] + k] = 0.0;
  ConstrainedDraw cd = constrain(layout, params);
  Observation obs = ds.observations[0];
  for (int p = 0; p < kNumPredictors; ++p) obs.x[p] = 0.0;
  LinearPredictors lp = linear_predictors(obs, cd, layout);
  CHECK(lp.log_mu == doctest::Approx(cd.b0));
  CHECK(lp.logit_xi == doctest::Approx(cd.g0));
}

TEST_CASE("log posterior with no observations is the log prior") {
  Dataset ds = tiny_dataset(10, 1, 1, 8, ModelKind::M0);
  ds.observations.clear();
  ModelSpec spec;
  spec.kind = ModelKind::M0;
  ModelEvaluator ev(ds, spec);
  std::vector<double> params(ev.dim(), 0.1);
  const LogDensityValue v = ev.value(params);
  REQUIRE(v.finite);
  CHECK(v.log_lik == 0.0);
  CHECK(v.log_posterior == doctest::Approx(v.log_prior));
}

TEST_CASE("one observation: log posterior equals pmf plus prior by hand") {
  Dataset ds = tiny_dataset(10, 1, 1, 9, ModelKind::M0);
  ds.observations.resize(1);
  ds.observations[0].y = 2;
  ModelSpec spec;
  spec.kind = ModelKind::M0;
  ModelEvaluator ev(ds, spec);
  ParamLayout layout = ev.layout();
  Rng rng(17);
  std::vector<double> params(ev.dim());
  for (auto& p : params) p = 0.2 * rng.normal();

  const LogDensityValue v = ev.value(params);
  REQUIRE(v.finite);
  ConstrainedDraw cd = constrain(layout, params);
  LinearPredictors lp = linear_predictors(ds.observations[0], cd, layout);
  const double expect =
      zinb_log_pmf(2, std::exp(lp.log_mu), cd.phi, sigmoid(lp.logit_xi));
  CHECK(v.log_lik == doctest::Approx(expect).epsilon(1e-10));

  // doubling the data doubles the likelihood part exactly
  Dataset doubled = ds;
  doubled.observations.push_back(ds.observations[0]);
  ModelEvaluator ev2(doubled, spec);
  const LogDensityValue v2 = ev2.value(params);
  CHECK(v2.log_lik == doctest::Approx(2.0 * v.log_lik).epsilon(1e-12));
  CHECK(v2.log_prior == doctest::Approx(v.log_prior).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences for all four kinds") {
  for (ModelKind kind : {ModelKind::M0, ModelKind::M1, ModelKind::M2, ModelKind::M3}) {
    Dataset ds = tiny_dataset(80, 3, 2, 21 + static_cast<int>(kind), kind);
    if (kind == ModelKind::M3) ds.outcome_kind = OutcomeKind::Removed;
    ModelSpec spec;
    spec.kind = kind;
    ModelEvaluator ev(ds, spec);
    Rng rng(40 + static_cast<int>(kind));
    for (int rep = 0; rep < 3; ++rep) {
      std::vector<double> params(ev.dim());
      for (auto& p : params) p = 0.4 * rng.normal();
      std::vector<double> grad;
      const LogDensityValue v = ev.value_and_gradient(params, grad);
      REQUIRE(v.finite);
      const std::vector<double> fd = finite_difference(ev, params);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const double scale = std::max({1.0, std::fabs(grad[i]), std::fabs(fd[i])});
        CHECK(std::fabs(grad[i] - fd[i]) / scale < 1e-5);
      }
    }
  }
}

TEST_CASE("gradient at the prior mode with empty data matches the prior gradient") {
  Dataset ds = tiny_dataset(10, 2, 2, 31, ModelKind::M1);
  ds.observations.clear();
  ModelSpec spec;
  spec.kind = ModelKind::M1;
  ModelEvaluator ev(ds, spec);
  Rng rng(53);
  std::vector<double> params(ev.dim());
  for (auto& p : params) p = 0.3 * rng.normal();
  std::vector<double> grad;
  REQUIRE(ev.value_and_gradient(params, grad).finite);
  const std::vector<double> fd = finite_difference(ev, params);
  for (std::size_t i = 0; i < grad.size(); ++i)
    CHECK(grad[i] == doctest::Approx(fd[i]).epsilon(1e-5));
}

TEST_CASE("non-centered rescaling leaves the likelihood part unchanged") {
  Dataset ds = tiny_dataset(120, 3, 2, 32, ModelKind::M1);
  ModelSpec spec;
  spec.kind = ModelKind::M1;
  ModelEvaluator ev(ds, spec);
  ParamLayout layout = ev.layout();
  Rng rng(54);
  std::vector<double> params(ev.dim());
  for (auto& p : params) p = 0.3 * rng.normal();
  const LogDensityValue base = ev.value(params);
  REQUIRE(base.finite);

  const double c = 1.7;
  std::vector<double> scaled = params;
  for (int blk = 0; blk < 4; ++blk) {
    for (int p = 0; p < layout.n_varying; ++p) scaled[layout.sigma_off[blk] + p] += std::log(c);
    for (int k = 0; k < layout.group_count(blk % 2) * layout.n_varying; ++k)
      scaled[layout.z_off[blk] + k] /= c;
  }
  const LogDensityValue rescaled = ev.value(scaled);
  REQUIRE(rescaled.finite);
  CHECK(rescaled.log_lik == doctest::Approx(base.log_lik).epsilon(1e-9));
  CHECK(rescaled.log_prior != doctest::Approx(base.log_prior).epsilon(1e-9));
}

TEST_CASE("pointwise log-lik rows sum to the likelihood part") {
  Dataset ds = tiny_dataset(50, 2, 2, 33, ModelKind::M2);
  ModelSpec spec;
  spec.kind = ModelKind::M2;
  ModelEvaluator ev(ds, spec);
  Rng rng(55);

  SampleBatch batch;
  batch.chains.resize(1);
  for (int d = 0; d < 3; ++d) {
    std::vector<double> params(ev.dim());
    for (auto& p : params) p = 0.3 * rng.normal();
    batch.chains[0].draws.push_back(params);
  }
  auto ll = pointwise_log_lik(batch, ds, spec);
  REQUIRE(ll.size() == 3);
  for (std::size_t d = 0; d < ll.size(); ++d) {
    double row_sum = 0.0;
    for (double v : ll[d]) row_sum += v;
    const LogDensityValue v = ev.value(batch.chains[0].draws[d]);
    CHECK(row_sum == doctest::Approx(v.log_lik).epsilon(1e-8));
  }
}

TEST_CASE("prior draws are deterministic and match closed-form moments") {
  ModelSpec spec;
  spec.kind = ModelKind::M2;
  ParamLayout layout = ParamLayout::make(spec, 4, 8);
  CHECK(sample_prior(spec, layout, 77) == sample_prior(spec, layout, 77));
  CHECK(sample_prior(spec, layout, 77) != sample_prior(spec, layout, 78));

  double sigma_sum = 0.0, phi_sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto draw = sample_prior(spec, layout, 1000 + i);
    sigma_sum += std::exp(draw[layout.sigma_off[0]]);
    phi_sum += std::exp(draw[layout.log_phi]);
  }
  // Weibull(2, 0.25) mean = 0.25 * Gamma(1.5)
  const double weibull_mean = 0.25 * std::exp(lgamma_safe(1.5));
  CHECK(sigma_sum / n == doctest::Approx(weibull_mean).epsilon(0.01));
  // Gamma(0.5, rate 0.1) mean = 5
  CHECK(phi_sum / n == doctest::Approx(5.0).epsilon(0.05));
}

TEST_CASE("cpc prior implies the LKJ marginal correlation moments") {
  // For P=4, eta=2 every off-diagonal correlation is marginally
  // 2*Beta(3,3)-1: mean 0, variance 1/7.
  ModelSpec spec;
  spec.kind = ModelKind::M2;
  ParamLayout layout = ParamLayout::make(spec, 2, 4);
  const int P = layout.n_varying;
  const int n = 20000;
  std::vector<double> sum(6, 0.0), sumsq(6, 0.0);
  for (int i = 0; i < n; ++i) {
    auto draw = sample_prior(spec, layout, 40000 + i);
    ConstrainedDraw cd = constrain(layout, draw);
    int c = 0;
    for (int r = 1; r < P; ++r) {
      for (int q = 0; q < r; ++q, ++c) {
        double rho = 0.0;
        for (int k = 0; k <= std::min(r, q); ++k)
          rho += cd.chol[0][r * P + k] * cd.chol[0][q * P + k];
        sum[c] += rho;
        sumsq[c] += rho * rho;
      }
    }
  }
  for (int c = 0; c < 6; ++c) {
    const double m = sum[c] / n;
    const double v = sumsq[c] / n - m * m;
    CHECK(std::fabs(m) < 0.02);
    CHECK(v == doctest::Approx(1.0 / 7.0).epsilon(0.06));
  }
}

TEST_CASE("constrained view is consistent with the unconstrained transform") {
  ModelSpec spec;
  spec.kind = ModelKind::M1;
  ParamLayout layout = ParamLayout::make(spec, 3, 5);
  auto params = sample_prior(spec, layout, 123);
  auto flat = constrained_flat(layout, params);
  REQUIRE(static_cast<int>(flat.size()) == layout.total);
  ConstrainedDraw cd = constrain(layout, params);
  CHECK(flat[0] == cd.b0);
  CHECK(flat.back() == cd.phi);
  CHECK(flat.back() == doctest::Approx(std::exp(params[layout.log_phi])));
}
