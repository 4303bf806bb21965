#include "ccm/fit.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <sstream>

#include "json.hpp"

#include "ccm/csv.hpp"
#include "ccm/errors.hpp"
#include "ccm/math.hpp"

namespace ccm {

SampleBatch fit_model(const Dataset& dataset, const ModelSpec& spec, const ChainConfig& config) {
  const ParamLayout layout = ParamLayout::make(spec, dataset.n_teams(), dataset.n_teamrepo());

  DensityFactory factory = [&dataset, &spec](int) -> LogProbGrad {
    auto evaluator = std::make_shared<ModelEvaluator>(dataset, spec);
    return [evaluator](const std::vector<double>& q, double& logp,
                       std::vector<double>& grad) -> bool {
      const LogDensityValue v = evaluator->value_and_gradient(q, grad);
      logp = v.log_posterior;
      return v.finite;
    };
  };

  SampleBatch batch = run_chains(factory, layout.total, config);
  batch.param_names = layout.names();
  batch.constrained_names = layout.constrained_names();
  batch.constrained.resize(batch.chains.size());
  for (std::size_t c = 0; c < batch.chains.size(); ++c) {
    batch.constrained[c].reserve(batch.chains[c].draws.size());
    for (const auto& u : batch.chains[c].draws)
      batch.constrained[c].push_back(constrained_flat(layout, u));
  }
  return batch;
}

std::vector<std::vector<double>> pointwise_log_lik(const SampleBatch& draws,
                                                   const Dataset& dataset,
                                                   const ModelSpec& spec) {
  const ParamLayout layout = ParamLayout::make(spec, dataset.n_teams(), dataset.n_teamrepo());
  for (const auto& chain : draws.chains)
    for (const auto& u : chain.draws)
      if (static_cast<int>(u.size()) != layout.total)
        throw ValidationError("draws do not match the model spec layout");

  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(draws.n_draws_total()));
  for (const auto& chain : draws.chains) {
    for (const auto& u : chain.draws) {
      const ConstrainedDraw cd = constrain(layout, u);
      std::vector<double> row(dataset.observations.size());
      for (std::size_t i = 0; i < dataset.observations.size(); ++i) {
        const LinearPredictors lp = linear_predictors(dataset.observations[i], cd, layout);
        row[i] = zinb_log_pmf(dataset.observations[i].y, std::exp(lp.log_mu), cd.phi,
                              sigmoid(lp.logit_xi));
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

namespace {

std::vector<ParameterSummary> summarize_view(
    const std::vector<std::string>& names,
    const std::function<double(std::size_t chain, std::size_t iter, std::size_t param)>& get,
    std::size_t n_chains, std::size_t n_iter) {
  std::vector<ParameterSummary> out(names.size());
  std::vector<std::vector<double>> per_chain(n_chains, std::vector<double>(n_iter));
  std::vector<double> pooled(n_chains * n_iter);
  for (std::size_t p = 0; p < names.size(); ++p) {
    for (std::size_t c = 0; c < n_chains; ++c)
      for (std::size_t i = 0; i < n_iter; ++i) {
        per_chain[c][i] = get(c, i, p);
        pooled[c * n_iter + i] = per_chain[c][i];
      }
    ParameterSummary& s = out[p];
    s.name = names[p];
    s.mean = mean(pooled);
    s.sd = pooled.size() > 1 ? sd(pooled) : 0.0;
    const ScalarDiagnostic r = split_rhat(per_chain);
    const ScalarDiagnostic e = ess(per_chain);
    s.rhat = r.value;
    s.ess = e.value;
    s.degenerate = r.degenerate || e.degenerate;
  }
  return out;
}

}  // namespace

FitSummary summarize_fit(const SampleBatch& batch) {
  FitSummary out;
  if (batch.chains.empty() || batch.chains[0].draws.empty()) return out;
  const std::size_t n_chains = batch.chains.size();
  std::size_t n_iter = batch.chains[0].draws.size();
  for (const auto& c : batch.chains) n_iter = std::min(n_iter, c.draws.size());

  out.unconstrained = summarize_view(
      batch.param_names,
      [&](std::size_t c, std::size_t i, std::size_t p) { return batch.chains[c].draws[i][p]; },
      n_chains, n_iter);
  if (!batch.constrained.empty() && !batch.constrained[0].empty()) {
    out.constrained = summarize_view(
        batch.constrained_names,
        [&](std::size_t c, std::size_t i, std::size_t p) { return batch.constrained[c][i][p]; },
        n_chains, n_iter);
  }
  for (const auto& c : batch.chains) {
    out.n_divergent += c.n_divergent;
    out.n_draws += static_cast<int>(c.draws.size());
  }
  out.max_rhat = 0.0;
  out.min_ess = std::numeric_limits<double>::infinity();
  for (const auto& s : out.unconstrained) {
    if (s.degenerate) continue;
    out.max_rhat = std::max(out.max_rhat, s.rhat);
    out.min_ess = std::min(out.min_ess, s.ess);
  }
  if (!std::isfinite(out.min_ess)) out.min_ess = 0.0;
  return out;
}

std::string draws_to_csv(const SampleBatch& batch, const std::string& manifest_comment) {
  std::string out;
  if (!manifest_comment.empty()) out += manifest_comment + "\n";
  out += "chain,iteration,parameter_name,value\n";
  for (std::size_t c = 0; c < batch.chains.size(); ++c) {
    const auto& draws = batch.chains[c].draws;
    for (std::size_t i = 0; i < draws.size(); ++i) {
      for (std::size_t p = 0; p < batch.param_names.size(); ++p) {
        out += std::to_string(c);
        out += ',';
        out += std::to_string(i);
        out += ',';
        out += batch.param_names[p];
        out += ',';
        out += format_double(draws[i][p]);
        out += '\n';
      }
    }
  }
  return out;
}

SampleBatch draws_from_csv(const std::string& csv_text, const Dataset& dataset,
                           const ModelSpec& spec) {
  const ParamLayout layout = ParamLayout::make(spec, dataset.n_teams(), dataset.n_teamrepo());
  const std::vector<std::string> names = layout.names();
  std::map<std::string, std::size_t> name_index;
  for (std::size_t p = 0; p < names.size(); ++p) name_index[names[p]] = p;

  std::istringstream in(csv_text);
  CsvFile csv = read_csv(in);
  static const std::vector<std::string> kHeader = {"chain", "iteration", "parameter_name",
                                                   "value"};
  if (csv.header != kHeader) throw ValidationError("draws CSV header mismatch");

  SampleBatch batch;
  batch.param_names = names;
  batch.constrained_names = layout.constrained_names();
  for (const auto& row : csv.rows) {
    if (row.size() != 4) throw ValidationError("draws CSV: bad field count");
    const std::size_t chain = static_cast<std::size_t>(std::stoul(row[0]));
    const std::size_t iter = static_cast<std::size_t>(std::stoul(row[1]));
    auto it = name_index.find(row[2]);
    if (it == name_index.end())
      throw ValidationError("draws CSV: parameter '" + row[2] + "' not in the layout");
    if (chain >= batch.chains.size()) batch.chains.resize(chain + 1);
    auto& draws = batch.chains[chain].draws;
    if (iter >= draws.size()) draws.resize(iter + 1);
    if (draws[iter].empty()) draws[iter].assign(static_cast<std::size_t>(layout.total), 0.0);
    draws[iter][it->second] = std::strtod(row[3].c_str(), nullptr);
  }
  batch.constrained.resize(batch.chains.size());
  for (std::size_t c = 0; c < batch.chains.size(); ++c) {
    batch.chains[c].divergent.assign(batch.chains[c].draws.size(), 0);
    batch.chains[c].treedepth.assign(batch.chains[c].draws.size(), 0);
    for (const auto& u : batch.chains[c].draws)
      batch.constrained[c].push_back(constrained_flat(layout, u));
  }
  return batch;
}

std::string fit_summary_to_json(const FitSummary& summary, const SampleBatch& batch,
                                const ModelSpec& spec, const std::string& manifest_json) {
  nlohmann::json j;
  j["model"] = to_string(spec.kind);
  j["layout_version"] = 1;
  j["priors"] = nlohmann::json::parse(spec.priors.to_json());
  j["sampler"] = {{"chains", batch.config.chains},
                  {"warmup", batch.config.warmup},
                  {"samples", batch.config.samples},
                  {"target_accept", batch.config.target_accept},
                  {"max_treedepth", batch.config.max_treedepth},
                  {"seed", batch.config.seed},
                  {"divergence_threshold", batch.config.divergence_threshold}};
  j["n_draws"] = summary.n_draws;
  j["n_divergent"] = summary.n_divergent;
  j["max_rhat"] = summary.max_rhat;
  j["min_ess"] = summary.min_ess;
  nlohmann::json chains = nlohmann::json::array();
  for (const auto& c : batch.chains)
    chains.push_back({{"step_size", c.step_size}, {"n_divergent", c.n_divergent}});
  j["chain_adaptation"] = chains;
  auto dump_params = [](const std::vector<ParameterSummary>& ps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : ps) {
      arr.push_back({{"name", s.name},
                     {"mean", s.mean},
                     {"sd", s.sd},
                     {"rhat", s.rhat},
                     {"ess", s.ess},
                     {"degenerate", s.degenerate}});
    }
    return arr;
  };
  j["parameters"] = dump_params(summary.unconstrained);
  j["constrained_parameters"] = dump_params(summary.constrained);
  if (!manifest_json.empty()) j["manifest"] = nlohmann::json::parse(manifest_json);
  return j.dump(2) + "\n";
}

}  // namespace ccm
