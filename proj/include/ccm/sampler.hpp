#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ccm/rng.hpp"

namespace ccm {

struct ChainConfig {
  int chains = 4;
  int warmup = 1000;
  int samples = 1000;
  double target_accept = 0.8;
  int max_treedepth = 10;
  std::uint64_t seed = 0;
  double init_radius = 2.0;
  double divergence_threshold = 1000.0;  // nats of energy error
  int max_init_retries = 100;
  int threads = 0;  // 0 = hardware/CLONE_COMMONS_THREADS
  std::vector<std::vector<double>> inits;  // optional explicit per-chain inits
};

struct ChainResult {
  std::vector<std::vector<double>> draws;  // post-warmup, unconstrained
  std::vector<std::uint8_t> divergent;
  std::vector<int> treedepth;
  double step_size = 0.0;
  std::vector<double> inv_mass;  // diagonal metric (posterior variances)
  int n_divergent = 0;
};

struct SampleBatch {
  ChainConfig config;
  std::vector<std::string> param_names;
  std::vector<ChainResult> chains;
  // Constrained views parallel to draws; filled by fit_model.
  std::vector<std::string> constrained_names;
  std::vector<std::vector<std::vector<double>>> constrained;

  int n_draws_total() const {
    int n = 0;
    for (const auto& c : chains) n += static_cast<int>(c.draws.size());
    return n;
  }
};

// Returns false when the density is not finite at q (treated as rejection).
using LogProbGrad =
    std::function<bool(const std::vector<double>& q, double& logp, std::vector<double>& grad)>;
// One density instance per chain (evaluators carry mutable scratch).
using DensityFactory = std::function<LogProbGrad(int chain)>;

// One leapfrog step of the Hamiltonian (q, p) with kinetic energy
// 0.5 * sum p_i^2 * inv_mass_i. Returns false on a non-finite gradient.
bool leapfrog(const LogProbGrad& f, std::vector<double>& q, std::vector<double>& p,
              double& logp, std::vector<double>& grad, double step_size,
              const std::vector<double>& inv_mass, int direction);

struct NutsStats {
  bool divergent = false;
  int treedepth = 0;
  int n_leapfrog = 0;
  double accept_stat = 0.0;
  double energy = 0.0;
};

// One No-U-Turn transition: multinomial sampling over a doubled trajectory,
// energy-error divergence at `divergence_threshold` nats.
void nuts_transition(const LogProbGrad& f, std::vector<double>& q, double& logp,
                     std::vector<double>& grad, double step_size,
                     const std::vector<double>& inv_mass, int max_treedepth,
                     double divergence_threshold, Rng& rng, NutsStats& stats);

SampleBatch run_chains(const DensityFactory& make_density, int dim, const ChainConfig& config);

struct ScalarDiagnostic {
  double value = 0.0;
  bool degenerate = false;
};

// Rank-normalized split R-hat; 1.0 (flagged) for zero-variance draws.
ScalarDiagnostic split_rhat(const std::vector<std::vector<double>>& chains);
// Effective sample size via Geyer's initial monotone sequence.
ScalarDiagnostic ess(const std::vector<std::vector<double>>& chains);

int thread_cap();  // CLONE_COMMONS_THREADS, else hardware concurrency

}  // namespace ccm
