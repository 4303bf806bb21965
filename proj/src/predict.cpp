#include "ccm/predict.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "ccm/errors.hpp"
#include "ccm/math.hpp"

namespace ccm {

double nb_log_pmf0(double mu, double phi) {
  const double lse = log_sum_exp(std::log(phi), std::log(mu));
  return phi * (std::log(phi) - lse);
}

double zinb_cdf(long c, double mu, double phi, double xi) {
  if (c < 0) return 0.0;
  const double r = mu / (phi + mu);
  double pmf = std::exp(nb_log_pmf0(mu, phi));
  double cdf_nb = pmf;
  for (long y = 0; y < c; ++y) {
    pmf *= (static_cast<double>(y) + phi) / (static_cast<double>(y) + 1.0) * r;
    cdf_nb += pmf;
  }
  if (cdf_nb > 1.0) cdf_nb = 1.0;
  return xi + (1.0 - xi) * cdf_nb;
}

long zinb_draw(Rng& rng, double mu, double phi, double xi) {
  if (rng.bernoulli(xi)) return 0;
  return rng.neg_binomial(mu, phi);
}

namespace {

struct DrawParams {
  double b0 = 0;
  std::vector<double> b_slopes;
  double g0 = 0;
  std::vector<double> g_slopes;
  std::array<std::vector<double>, 4> off;  // selected offsets per block, length P
  double phi = 1;
};

// Fresh group offsets from one draw's scale/correlation: sigma .* (L z).
std::vector<double> fresh_offsets(const ConstrainedDraw& cd, int blk, int p_dim, Rng& rng) {
  std::vector<double> z(p_dim);
  for (auto& zi : z) zi = rng.normal();
  std::vector<double> off(p_dim, 0.0);
  for (int p = 0; p < p_dim; ++p) {
    double acc = 0.0;
    for (int q = 0; q <= p; ++q) acc += cd.chol[blk][p * p_dim + q] * z[q];
    off[p] = cd.sigma[blk][p] * acc;
  }
  return off;
}

// Resolves per-draw parameters for a setting's team/repo selector. Offsets for
// NEW teams and unseen cells are drawn once per posterior draw.
std::vector<DrawParams> resolve_draws(const PredictorSetting& setting, const SampleBatch& draws,
                                      const Dataset& dataset, const ModelSpec& spec,
                                      std::uint64_t seed) {
  const ParamLayout layout = ParamLayout::make(spec, dataset.n_teams(), dataset.n_teamrepo());
  const int P = layout.n_varying;

  int team_idx = -1, teamrepo_idx = -1, repo_idx = -1;
  if (!setting.average() && !setting.new_team()) {
    auto it = std::find(dataset.team_names.begin(), dataset.team_names.end(), setting.team);
    if (it == dataset.team_names.end())
      throw ValidationError("unknown team '" + setting.team +
                            "' (use AVERAGE or NEW for synthetic teams)");
    team_idx = static_cast<int>(it - dataset.team_names.begin());
  }
  if (!setting.average()) {
    auto it = std::find(dataset.repo_names.begin(), dataset.repo_names.end(), setting.repo);
    if (it == dataset.repo_names.end())
      throw ValidationError("unknown repo '" + setting.repo + "'");
    repo_idx = static_cast<int>(it - dataset.repo_names.begin());
    if (team_idx >= 0) teamrepo_idx = dataset.teamrepo_index(team_idx, repo_idx);
  }

  Rng rng(seed, 0x6f666673);  // offset stream
  std::vector<DrawParams> out;
  out.reserve(static_cast<std::size_t>(draws.n_draws_total()));
  for (const auto& chain : draws.chains) {
    for (const auto& u : chain.draws) {
      const ConstrainedDraw cd = constrain(layout, u);
      DrawParams dp;
      dp.b0 = cd.b0;
      dp.b_slopes = cd.b_slopes;
      dp.g0 = cd.g0;
      dp.g_slopes = cd.g_slopes;
      dp.phi = cd.phi;
      for (int blk = 0; blk < 4; ++blk) {
        const int factor = blk % 2;
        if (setting.average()) {
          dp.off[blk].assign(P, 0.0);
        } else if (factor == 0) {  // team block
          if (setting.new_team()) {
            dp.off[blk] = fresh_offsets(cd, blk, P, rng);
          } else {
            dp.off[blk].assign(cd.offsets[blk].begin() + team_idx * P,
                               cd.offsets[blk].begin() + (team_idx + 1) * P);
          }
        } else {  // team-repo block
          if (setting.new_team() || teamrepo_idx < 0) {
            dp.off[blk] = fresh_offsets(cd, blk, P, rng);
          } else {
            dp.off[blk].assign(cd.offsets[blk].begin() + teamrepo_idx * P,
                               cd.offsets[blk].begin() + (teamrepo_idx + 1) * P);
          }
        }
      }
      out.push_back(std::move(dp));
    }
  }
  return out;
}

void standardized_x(const Dataset& dataset, const PredictorSetting& s, double x[kNumPredictors]) {
  x[0] = dataset.standardization.standardize(0, s.add);
  x[1] = dataset.standardization.standardize(1, s.rem);
  x[2] = dataset.standardization.standardize(2, s.comp);
  x[3] = dataset.standardization.standardize(3, s.dup);
}

void mu_xi_for(const DrawParams& dp, const ModelSpec& spec, const double x[kNumPredictors],
               double& mu, double& xi) {
  const std::vector<int> slopes = spec.population_slopes();
  const int P = spec.n_varying();
  double eta_b = dp.b0, eta_g = dp.g0;
  for (std::size_t s = 0; s < slopes.size(); ++s) {
    eta_b += dp.b_slopes[s] * x[slopes[s]];
    eta_g += dp.g_slopes[s] * x[slopes[s]];
  }
  for (int factor = 0; factor < 2; ++factor) {
    eta_b += dp.off[factor][0];
    eta_g += dp.off[2 + factor][0];
    for (int t = 1; t < P; ++t) {
      eta_b += dp.off[factor][t] * x[t];
      eta_g += dp.off[2 + factor][t] * x[t];
    }
  }
  mu = std::exp(eta_b);
  xi = sigmoid(eta_g);
}

IntervalSummary summarize(std::vector<double> values, double level) {
  IntervalSummary s;
  s.level = level;
  s.estimate = median(values);
  auto [lo, hi] = central_interval(std::move(values), level);
  s.lo = lo;
  s.hi = hi;
  return s;
}

}  // namespace

PredictiveParams predictive_params(const PredictorSetting& setting, const SampleBatch& draws,
                                   const Dataset& dataset, const ModelSpec& spec,
                                   std::uint64_t seed) {
  const auto resolved = resolve_draws(setting, draws, dataset, spec, seed);
  double x[kNumPredictors];
  standardized_x(dataset, setting, x);
  PredictiveParams out;
  out.mu.reserve(resolved.size());
  out.xi.reserve(resolved.size());
  out.phi.reserve(resolved.size());
  for (const auto& dp : resolved) {
    double mu, xi;
    mu_xi_for(dp, spec, x, mu, xi);
    out.mu.push_back(mu);
    out.xi.push_back(xi);
    out.phi.push_back(dp.phi);
  }
  return out;
}

std::vector<long> posterior_predict(const PredictorSetting& setting, const SampleBatch& draws,
                                    const Dataset& dataset, const ModelSpec& spec, int n_rep,
                                    std::uint64_t seed) {
  const PredictiveParams p = predictive_params(setting, draws, dataset, spec, seed);
  Rng rng(seed, 0x70726564);  // predictive stream
  std::vector<long> out;
  out.reserve(p.mu.size() * static_cast<std::size_t>(n_rep));
  for (std::size_t s = 0; s < p.mu.size(); ++s)
    for (int r = 0; r < n_rep; ++r) out.push_back(zinb_draw(rng, p.mu[s], p.phi[s], p.xi[s]));
  return out;
}

IntervalSummary prob_at_least_one(const PredictorSetting& setting, const SampleBatch& draws,
                                  const Dataset& dataset, const ModelSpec& spec, double level,
                                  std::uint64_t seed) {
  const PredictiveParams p = predictive_params(setting, draws, dataset, spec, seed);
  std::vector<double> probs(p.mu.size());
  for (std::size_t s = 0; s < p.mu.size(); ++s)
    probs[s] = (1.0 - p.xi[s]) * (-std::expm1(nb_log_pmf0(p.mu[s], p.phi[s])));
  return summarize(std::move(probs), level);
}

std::vector<CumulativePoint> cumulative_curve(const PredictorSetting& setting,
                                              const SampleBatch& draws, const Dataset& dataset,
                                              const ModelSpec& spec, int max_count, double level,
                                              std::uint64_t seed) {
  const PredictiveParams p = predictive_params(setting, draws, dataset, spec, seed);
  const std::size_t s = p.mu.size();
  std::vector<std::vector<double>> cdf_draws(static_cast<std::size_t>(max_count) + 1,
                                             std::vector<double>(s));
  for (std::size_t d = 0; d < s; ++d) {
    const double r = p.mu[d] / (p.phi[d] + p.mu[d]);
    double pmf = std::exp(nb_log_pmf0(p.mu[d], p.phi[d]));
    double cdf_nb = pmf;
    for (int c = 0; c <= max_count; ++c) {
      cdf_draws[static_cast<std::size_t>(c)][d] =
          std::min(1.0, p.xi[d] + (1.0 - p.xi[d]) * cdf_nb);
      pmf *= (static_cast<double>(c) + p.phi[d]) / (static_cast<double>(c) + 1.0) * r;
      cdf_nb += pmf;
    }
  }
  std::vector<CumulativePoint> out(static_cast<std::size_t>(max_count) + 1);
  for (int c = 0; c <= max_count; ++c) {
    out[static_cast<std::size_t>(c)].count = c;
    out[static_cast<std::size_t>(c)].prob =
        summarize(std::move(cdf_draws[static_cast<std::size_t>(c)]), level);
  }
  return out;
}

NewTeamOffsets simulate_new_team(const SampleBatch& draws, const ModelSpec& spec,
                                 const ParamLayout& layout, std::uint64_t seed) {
  Rng rng(seed, 0x6e657774);  // new-team stream
  NewTeamOffsets out;
  const int P = layout.n_varying;
  for (const auto& chain : draws.chains) {
    for (const auto& u : chain.draws) {
      const ConstrainedDraw cd = constrain(layout, u);
      std::array<std::vector<double>, 4> offs;
      for (int blk = 0; blk < 4; ++blk) offs[blk] = fresh_offsets(cd, blk, P, rng);
      out.per_draw.push_back(std::move(offs));
    }
  }
  (void)spec;
  return out;
}

std::vector<EffectPoint> conditional_effects(const PredictorSetting& fixed, int vary_predictor,
                                             double x_min, double x_max, int grid_points,
                                             const SampleBatch& draws, const Dataset& dataset,
                                             const ModelSpec& spec, double level,
                                             std::uint64_t seed) {
  if (vary_predictor < 0 || vary_predictor >= kNumPredictors)
    throw ValidationError("conditional_effects: predictor must be one of add|rem|comp|dup");
  const auto resolved = resolve_draws(fixed, draws, dataset, spec, seed);
  std::vector<EffectPoint> out;
  out.reserve(static_cast<std::size_t>(grid_points));
  for (int g = 0; g < grid_points; ++g) {
    const double raw =
        x_min + (x_max - x_min) * (grid_points == 1 ? 0.0
                                                    : static_cast<double>(g) /
                                                          static_cast<double>(grid_points - 1));
    PredictorSetting s = fixed;
    switch (vary_predictor) {
      case 0: s.add = raw; break;
      case 1: s.rem = raw; break;
      case 2: s.comp = raw; break;
      case 3: s.dup = raw; break;
    }
    double x[kNumPredictors];
    standardized_x(dataset, s, x);
    std::vector<double> expected(resolved.size());
    for (std::size_t d = 0; d < resolved.size(); ++d) {
      double mu, xi;
      mu_xi_for(resolved[d], spec, x, mu, xi);
      expected[d] = (1.0 - xi) * mu;
    }
    EffectPoint pt;
    pt.x_raw = raw;
    pt.expected = summarize(std::move(expected), level);
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<std::vector<long>> replicate_outcomes(const SampleBatch& draws,
                                                  const Dataset& dataset, const ModelSpec& spec,
                                                  std::uint64_t seed) {
  const ParamLayout layout = ParamLayout::make(spec, dataset.n_teams(), dataset.n_teamrepo());
  Rng rng(seed, 0x72657073);  // replication stream
  std::vector<std::vector<long>> reps;
  reps.reserve(static_cast<std::size_t>(draws.n_draws_total()));
  for (const auto& chain : draws.chains) {
    for (const auto& u : chain.draws) {
      const ConstrainedDraw cd = constrain(layout, u);
      std::vector<long> rep(dataset.observations.size());
      for (std::size_t i = 0; i < dataset.observations.size(); ++i) {
        const LinearPredictors lp = linear_predictors(dataset.observations[i], cd, layout);
        rep[i] = zinb_draw(rng, std::exp(lp.log_mu), cd.phi, sigmoid(lp.logit_xi));
      }
      reps.push_back(std::move(rep));
    }
  }
  return reps;
}

std::vector<double> make_truth(const ModelSpec& spec, const ParamLayout& layout,
                               const TruthConfig& cfg, std::uint64_t seed) {
  Rng rng(seed, 0x74727574);  // truth stream
  std::vector<double> t(layout.total, 0.0);
  t[layout.b_pop] = cfg.b0;
  t[layout.g_pop] = cfg.g0;
  for (std::size_t s = 0; s < layout.pop_slopes.size(); ++s) {
    t[layout.b_pop + 1 + s] = s < cfg.b_slopes.size() ? cfg.b_slopes[s] : 0.0;
    t[layout.g_pop + 1 + s] = s < cfg.g_slopes.size() ? cfg.g_slopes[s] : 0.0;
  }
  const int P = layout.n_varying;
  for (int blk = 0; blk < 4; ++blk) {
    const double sigma = blk < 2 ? cfg.sigma_b : cfg.sigma_g;
    for (int p = 0; p < P; ++p) t[layout.sigma_off[blk] + p] = std::log(sigma);
    // cpc left at zero: identity correlation
    const int K = layout.group_count(blk % 2);
    for (int k = 0; k < K * P; ++k) t[layout.z_off[blk] + k] = rng.normal();
  }
  t[layout.log_phi] = std::log(cfg.phi);
  return t;
}

SimulatedData simulate_dataset(const ModelSpec& spec, const TruthConfig& truth,
                               const SimulationDesign& design, OutcomeKind outcome,
                               std::uint64_t seed) {
  if (design.n_teams < 1 || design.n_repos < 1 || design.n_obs < design.n_teams * design.n_repos)
    throw ValidationError("simulate_dataset: design must cover every team-repo cell");

  SimulatedData out;
  Dataset& ds = out.dataset;
  ds.outcome_kind = outcome;
  char buf[16];
  for (int t = 0; t < design.n_teams; ++t) {
    std::snprintf(buf, sizeof(buf), "team%02d", t);
    ds.team_names.push_back(buf);
  }
  for (int r = 0; r < design.n_repos; ++r) {
    std::snprintf(buf, sizeof(buf), "repo%02d", r);
    ds.repo_names.push_back(buf);
  }
  for (int t = 0; t < design.n_teams; ++t)
    for (int r = 0; r < design.n_repos; ++r) ds.teamrepo_cells.emplace_back(t, r);

  out.layout = ParamLayout::make(spec, design.n_teams, design.n_teams * design.n_repos);
  out.truth = make_truth(spec, out.layout, truth, seed);

  // Right-skewed raw predictors, roughly matching mined change logs.
  Rng rng(seed, 0x73696d64);  // simulation stream
  const int n = design.n_obs;
  std::vector<double> raw[kNumPredictors];
  static const double log_mu[kNumPredictors] = {1.8, 1.0, 2.8, 0.0};
  static const double log_sd[kNumPredictors] = {1.3, 1.3, 1.0, 1.5};
  for (int p = 0; p < kNumPredictors; ++p) {
    raw[p].resize(n);
    for (int i = 0; i < n; ++i)
      raw[p][i] = std::floor(std::exp(log_mu[p] + log_sd[p] * rng.normal()));
  }
  std::vector<double> cols[kNumPredictors];
  for (int p = 0; p < kNumPredictors; ++p) {
    auto [col, params] = log1p_standardize(raw[p]);
    cols[p] = std::move(col);
    ds.standardization.per[p] = params;
  }

  const ConstrainedDraw cd = constrain(out.layout, out.truth);
  ds.observations.resize(n);
  for (int i = 0; i < n; ++i) {
    Observation& o = ds.observations[i];
    o.team = i % design.n_teams;
    o.repo = (i / design.n_teams) % design.n_repos;
    o.teamrepo = ds.teamrepo_index(o.team, o.repo);
    for (int p = 0; p < kNumPredictors; ++p) o.x[p] = cols[p][i];
    const LinearPredictors lp = linear_predictors(o, cd, out.layout);
    o.y = zinb_draw(rng, std::exp(lp.log_mu), cd.phi, sigmoid(lp.logit_xi));
  }
  return out;
}

}  // namespace ccm
