#pragma once

#include <string>
#include <vector>

#include "ccm/model.hpp"
#include "ccm/sampler.hpp"

namespace ccm {

// Runs the sampler on the model's log posterior; fills unconstrained and
// constrained views plus parameter names.
SampleBatch fit_model(const Dataset& dataset, const ModelSpec& spec, const ChainConfig& config);

// Entry (s, i) = zinb log pmf of observation i under draw s (chains
// concatenated in order).
std::vector<std::vector<double>> pointwise_log_lik(const SampleBatch& draws,
                                                   const Dataset& dataset, const ModelSpec& spec);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double rhat = 1.0;
  double ess = 0.0;
  bool degenerate = false;
};

struct FitSummary {
  std::vector<ParameterSummary> unconstrained;  // diagnostics on sampler scale
  std::vector<ParameterSummary> constrained;    // means/sds on natural scale
  int n_divergent = 0;
  int n_draws = 0;
  double max_rhat = 0.0;
  double min_ess = 0.0;
};

FitSummary summarize_fit(const SampleBatch& batch);

// Long-format persistence: chain,iteration,parameter_name,value over the
// unconstrained draws (the constrained view is recomputed on load).
std::string draws_to_csv(const SampleBatch& batch, const std::string& manifest_comment = "");
SampleBatch draws_from_csv(const std::string& csv_text, const Dataset& dataset,
                           const ModelSpec& spec);

std::string fit_summary_to_json(const FitSummary& summary, const SampleBatch& batch,
                                const ModelSpec& spec, const std::string& manifest_json);

}  // namespace ccm
