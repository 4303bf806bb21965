#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccm/model.hpp"
#include "ccm/sampler.hpp"

namespace ccm {

// Raw predictor counts plus a team/repo selector. AVERAGE sets group offsets
// to zero (the population expectation); NEW draws fresh offsets per posterior
// draw from that draw's covariance (full partial-pooling uncertainty).
struct PredictorSetting {
  double add = 0, rem = 0, comp = 0, dup = 0;
  std::string team;  // name, or "AVERAGE" / "NEW"
  std::string repo;  // name (must be known unless team is AVERAGE/NEW with known repo)

  bool average() const { return team == "AVERAGE"; }
  bool new_team() const { return team == "NEW"; }
};

// (mu, xi, phi) per posterior draw for a setting. Fresh-offset draws for
// NEW teams and unseen cells are deterministic per seed.
struct PredictiveParams {
  std::vector<double> mu, xi, phi;
};

PredictiveParams predictive_params(const PredictorSetting& setting, const SampleBatch& draws,
                                   const Dataset& dataset, const ModelSpec& spec,
                                   std::uint64_t seed = 0);

// Predictive count samples: n_rep replicates per posterior draw.
std::vector<long> posterior_predict(const PredictorSetting& setting, const SampleBatch& draws,
                                    const Dataset& dataset, const ModelSpec& spec, int n_rep,
                                    std::uint64_t seed);

struct IntervalSummary {
  double estimate = 0.0;  // median over draws
  double lo = 0.0, hi = 0.0;
  double level = 0.89;
};

// P(y >= 1) = (1 - xi)(1 - NB(0 | mu, phi)), analytic per draw.
IntervalSummary prob_at_least_one(const PredictorSetting& setting, const SampleBatch& draws,
                                  const Dataset& dataset, const ModelSpec& spec,
                                  double level = 0.89, std::uint64_t seed = 0);

struct CumulativePoint {
  long count = 0;
  IntervalSummary prob;  // P(y <= count)
};

std::vector<CumulativePoint> cumulative_curve(const PredictorSetting& setting,
                                              const SampleBatch& draws, const Dataset& dataset,
                                              const ModelSpec& spec, int max_count,
                                              double level = 0.89, std::uint64_t seed = 0);

// Per-draw fresh offsets for a synthetic team (team block and one team-repo
// cell), sampled from MVN(0, diag(sigma) L L' diag(sigma)) of each draw.
struct NewTeamOffsets {
  // [draw][block(4)][coef]; blocks ordered as in ParamLayout
  std::vector<std::array<std::vector<double>, 4>> per_draw;
};
NewTeamOffsets simulate_new_team(const SampleBatch& draws, const ModelSpec& spec,
                                 const ParamLayout& layout, std::uint64_t seed);

struct EffectPoint {
  double x_raw = 0.0;
  IntervalSummary expected;  // E[y] = (1 - xi) * mu
};

// Expected-count grid over one raw predictor, others held fixed.
std::vector<EffectPoint> conditional_effects(const PredictorSetting& fixed, int vary_predictor,
                                             double x_min, double x_max, int grid_points,
                                             const SampleBatch& draws, const Dataset& dataset,
                                             const ModelSpec& spec, double level = 0.89,
                                             std::uint64_t seed = 0);

// ZINB distribution helpers shared with the diagnostics pipeline.
double nb_log_pmf0(double mu, double phi);              // log NB(0 | mu, phi)
double zinb_cdf(long c, double mu, double phi, double xi);
long zinb_draw(Rng& rng, double mu, double phi, double xi);

// Replicated outcome datasets at the training design (one per posterior draw),
// for posterior predictive checks.
std::vector<std::vector<long>> replicate_outcomes(const SampleBatch& draws,
                                                  const Dataset& dataset, const ModelSpec& spec,
                                                  std::uint64_t seed);

struct SimulationDesign {
  int n_teams = 5;
  int n_repos = 4;
  int n_obs = 5000;
};

struct SimulatedData {
  Dataset dataset;
  std::vector<double> truth;  // unconstrained, in layout order
  ParamLayout layout;
};

// Population-level values for building a simulation truth vector.
struct TruthConfig {
  double b0 = -3.0;
  std::vector<double> b_slopes;  // aligned with spec.population_slopes()
  double g0 = 1.0;
  std::vector<double> g_slopes;
  double sigma_b = 0.3;   // all beta-side group scales
  double sigma_g = 0.25;  // all gamma-side group scales
  double phi = 1.5;
};

std::vector<double> make_truth(const ModelSpec& spec, const ParamLayout& layout,
                               const TruthConfig& cfg, std::uint64_t seed);

// Right-skewed predictors, outcomes drawn from the exact model at `truth`.
SimulatedData simulate_dataset(const ModelSpec& spec, const TruthConfig& truth,
                               const SimulationDesign& design, OutcomeKind outcome,
                               std::uint64_t seed);

}  // namespace ccm
