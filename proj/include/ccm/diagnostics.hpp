#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ccm {

struct GpdFit {
  double k = 0.0;
  double sigma = 1.0;
  bool degenerate = false;  // all-equal tail; k is a -inf sentinel
};

// Generalized Pareto shape/scale via the Zhang-Stephens profile-likelihood
// quadrature estimator with the usual weak-prior shrinkage of k.
GpdFit gpd_fit_tail(std::vector<double> tail_excesses);

struct LooResult {
  std::vector<double> pointwise;  // elpd_i
  std::vector<double> pareto_k;
  double elpd = 0.0;
  double se = 0.0;
  std::vector<int> flagged;  // indices with k > threshold
  double k_threshold = 0.7;
};

// Per-observation smoothed importance weights, for invariant checks.
struct PsisDetail {
  std::vector<std::vector<double>> log_weights;  // [obs][draw], unnormalized
  std::vector<double> raw_max;                   // truncation bound per obs
};

// log_lik is draw-major: log_lik[s][i] for draw s, observation i.
LooResult psis_loo(const std::vector<std::vector<double>>& log_lik, double k_threshold = 0.7,
                   PsisDetail* detail = nullptr);

struct ModelComparisonRow {
  std::string name;
  double elpd = 0.0;
  double elpd_diff = 0.0;  // relative to the best model (0 for best)
  double se_diff = 0.0;
};

std::vector<ModelComparisonRow> compare_models(const std::vector<std::string>& names,
                                               const std::vector<LooResult>& results);

struct RefitOutcome {
  double elpd_i = 0.0;
  bool converged = true;
  double max_rhat = 1.0;
};
using RefitFn = std::function<RefitOutcome(int obs_index)>;

struct RelooResult {
  LooResult corrected;
  std::vector<int> nonconverged;  // indices whose refit failed convergence
};

// Exact leave-one-out refits replacing the flagged pointwise contributions.
RelooResult reloo(const LooResult& base, const RefitFn& refit);

struct RootogramBin {
  long count = 0;
  double expected = 0.0;       // mean frequency across predictive draws
  double expected_lo = 0.0;    // central 95% band over draws
  double expected_hi = 0.0;
  double observed = 0.0;
  double sqrt_expected = 0.0;
  double sqrt_expected_lo = 0.0;
  double sqrt_expected_hi = 0.0;
  double sqrt_observed = 0.0;
  double deviation = 0.0;  // sqrt(expected) - sqrt(observed), suspended style
};

struct RootogramData {
  std::vector<RootogramBin> bins;  // contiguous counts 0..max_count
};

// predictive is draw-major: predictive[s] is one replicated dataset.
RootogramData rootogram(const std::vector<long>& observed,
                        const std::vector<std::vector<long>>& predictive, int max_count);

enum class PpcStatistic { PropZero, Q95, Q99 };
PpcStatistic ppc_statistic_from_string(const std::string& s);
std::string to_string(PpcStatistic s);

struct PpcResult {
  std::vector<double> draws;  // statistic per predictive draw
  double observed = 0.0;
};

PpcResult ppc_stat(const std::vector<long>& observed,
                   const std::vector<std::vector<long>>& predictive, PpcStatistic stat);

}  // namespace ccm
