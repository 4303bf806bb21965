#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ccm/autodiff.hpp"
#include "ccm/dataset.hpp"

namespace ccm {

enum class ModelKind { M0, M1, M2, M3 };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct PriorConfig {
  double intercept_scale = 0.5;  // beta0, gamma0 ~ Normal(0, 0.5)
  double slope_scale = 0.25;     // population slopes ~ Normal(0, 0.25)
  double sigma_shape = 2.0;      // sigma ~ Weibull(2, 0.25)
  double sigma_scale = 0.25;
  double lkj_eta = 2.0;          // Omega ~ LKJ(2)
  double phi_shape = 0.5;        // phi ~ Gamma(0.5, rate 0.1)
  double phi_rate = 0.1;

  std::string to_json() const;
  static PriorConfig from_json(const std::string& text);
};

struct ModelSpec {
  ModelKind kind = ModelKind::M0;
  PriorConfig priors;

  // Population slopes present in the linear predictors, as predictor columns
  // (0=A, 1=R, 2=C, 3=D). M0/M3: none; M1: A,R; M2: A,R,C,D.
  std::vector<int> population_slopes() const;
  // Varying terms beyond the intercept, as predictor columns. M0/M3: none;
  // M1: R; M2: R,C,D. The zero-inflation side mirrors this structure.
  std::vector<int> varying_predictors() const;
  int n_varying() const { return 1 + static_cast<int>(varying_predictors().size()); }
  OutcomeKind default_outcome() const {
    return kind == ModelKind::M3 ? OutcomeKind::Removed : OutcomeKind::Introduced;
  }
};

// Unconstrained parameter layout, fixed per (spec, group counts):
//   [beta population] [gamma population]
//   [log sigma x 4 blocks] [cpc x 4 blocks] [z x 4 blocks] [log phi]
// Blocks are ordered (beta,team), (beta,teamrepo), (gamma,team),
// (gamma,teamrepo); z blocks are group-major.
struct ParamLayout {
  int n_varying = 1;
  int n_team = 0;
  int n_teamrepo = 0;
  std::vector<int> pop_slopes;

  int b_pop = 0;
  int g_pop = 0;
  int sigma_off[4] = {0, 0, 0, 0};
  int cpc_off[4] = {0, 0, 0, 0};
  int z_off[4] = {0, 0, 0, 0};
  int log_phi = 0;
  int total = 0;

  int n_pop() const { return 1 + static_cast<int>(pop_slopes.size()); }
  int n_cpc() const { return n_varying * (n_varying - 1) / 2; }
  int group_count(int factor) const { return factor == 0 ? n_team : n_teamrepo; }

  static ParamLayout make(const ModelSpec& spec, int n_team, int n_teamrepo);
  std::vector<std::string> names() const;
  std::vector<std::string> constrained_names() const;
};

// Constrained-scale view of one draw: population coefficients, per-group
// offsets (already sigma * L * z), scales, correlation Cholesky factors, phi.
struct ConstrainedDraw {
  double b0 = 0;
  std::vector<double> b_slopes;  // aligned with layout.pop_slopes
  double g0 = 0;
  std::vector<double> g_slopes;
  std::vector<double> offsets[4];  // [block], group-major K x P
  std::vector<double> sigma[4];    // [block], P
  std::vector<double> chol[4];     // [block], P x P row-major lower-triangular
  double phi = 1;
};

ConstrainedDraw constrain(const ParamLayout& layout, const std::vector<double>& params);
// Flat constrained view, parallel to constrained_names().
std::vector<double> constrained_flat(const ParamLayout& layout, const std::vector<double>& params);

// Zero-inflated negative binomial log pmf (Eq. of the mixture with a
// Bernoulli gate on zero). Total over xi in [0,1]; mu, phi > 0.
double zinb_log_pmf(long y, double mu, double phi, double xi);

// Linear predictors for one observation under a constrained draw.
struct LinearPredictors {
  double log_mu = 0;
  double logit_xi = 0;
};
LinearPredictors linear_predictors(const Observation& obs, const ConstrainedDraw& draw,
                                   const ParamLayout& layout);

struct LogDensityValue {
  double log_posterior = 0;
  double log_lik = 0;
  double log_prior = 0;
  bool finite = false;
};

// Reusable log-posterior/gradient evaluator. Group-level transforms and prior
// densities run on a reverse-mode tape; the per-observation likelihood and its
// partials are analytic and seed the tape's adjoints. Not thread-safe: give
// each chain its own instance.
class ModelEvaluator {
 public:
  ModelEvaluator(const Dataset& dataset, const ModelSpec& spec);

  const ParamLayout& layout() const { return layout_; }
  int dim() const { return layout_.total; }

  // Returns finite=false on any non-finite intermediate (callers treat that
  // as a rejected/divergent point).
  LogDensityValue value(const std::vector<double>& params);
  LogDensityValue value_and_gradient(const std::vector<double>& params,
                                     std::vector<double>& grad);

 private:
  LogDensityValue eval(const std::vector<double>& params, std::vector<double>* grad);

  ModelSpec spec_;
  ParamLayout layout_;
  // Flattened dataset.
  std::vector<long> y_;
  std::vector<double> lgamma_y1_;
  std::vector<double> x_[kNumPredictors];
  std::vector<int> team_, teamrepo_;

  ad::Tape tape_;
  std::vector<double> adj_;
};

LogDensityValue log_posterior(const std::vector<double>& params, const Dataset& dataset,
                              const ModelSpec& spec);
std::vector<double> gradient(const std::vector<double>& params, const Dataset& dataset,
                             const ModelSpec& spec);

// Independent draw from the prior, mapped to the unconstrained layout.
std::vector<double> sample_prior(const ModelSpec& spec, const ParamLayout& layout,
                                 std::uint64_t seed);

}  // namespace ccm
