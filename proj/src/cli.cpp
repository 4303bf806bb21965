#include "ccm/cli.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ccm/clone_metrics.hpp"
#include "ccm/csv.hpp"
#include "ccm/dataset.hpp"
#include "ccm/diagnostics.hpp"
#include "ccm/errors.hpp"
#include "ccm/fit.hpp"
#include "ccm/ingest.hpp"
#include "ccm/manifest.hpp"
#include "ccm/math.hpp"
#include "ccm/model.hpp"
#include "ccm/ocam.hpp"
#include "ccm/predict.hpp"
#include "ccm/report.hpp"
#include "ccm/sampler.hpp"

namespace fs = std::filesystem;

namespace ccm {

namespace {

struct FitArtifacts {
  Dataset dataset;
  ModelSpec spec;
  SampleBatch batch;
  std::uint64_t seed = 0;
};

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

std::string path_join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void require_artifact(const std::string& path) {
  if (!fs::exists(path)) throw ValidationError("missing upstream artifact: " + path);
}

Dataset load_dataset_dir(const std::string& dir) {
  require_artifact(path_join(dir, "dataset.json"));
  require_artifact(path_join(dir, "dataset.csv"));
  return Dataset::load(read_text_file(path_join(dir, "dataset.json")),
                       read_text_file(path_join(dir, "dataset.csv")));
}

FitArtifacts load_fit_dir(const std::string& dir) {
  FitArtifacts fa;
  fa.dataset = load_dataset_dir(dir);
  require_artifact(path_join(dir, "summary.json"));
  require_artifact(path_join(dir, "draws.csv"));
  nlohmann::json summary;
  try {
    summary = nlohmann::json::parse(read_text_file(path_join(dir, "summary.json")));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("summary.json: ") + e.what());
  }
  fa.spec.kind = model_kind_from_string(summary.at("model").get<std::string>());
  fa.spec.priors = PriorConfig::from_json(summary.at("priors").dump());
  fa.seed = summary.at("sampler").value("seed", 0ull);
  fa.batch = draws_from_csv(read_text_file(path_join(dir, "draws.csv")), fa.dataset, fa.spec);
  const auto& sampler = summary.at("sampler");
  fa.batch.config.chains = sampler.value("chains", fa.batch.config.chains);
  fa.batch.config.warmup = sampler.value("warmup", fa.batch.config.warmup);
  fa.batch.config.samples = sampler.value("samples", fa.batch.config.samples);
  fa.batch.config.target_accept = sampler.value("target_accept", fa.batch.config.target_accept);
  fa.batch.config.max_treedepth = sampler.value("max_treedepth", fa.batch.config.max_treedepth);
  fa.batch.config.seed = fa.seed;
  return fa;
}

// Canonical simulation truths per model kind; written out alongside the data.
TruthConfig default_truth(const ModelSpec& spec) {
  TruthConfig t;
  t.b0 = -2.2;
  t.g0 = 1.0;
  t.sigma_b = 0.35;
  t.sigma_g = 0.25;
  t.phi = 1.5;
  const std::size_t k = spec.population_slopes().size();
  if (k >= 2) {
    t.b_slopes = {0.4, 0.2};
    t.g_slopes = {-0.3, -0.1};
  }
  if (k == 4) {
    t.b_slopes = {0.4, 0.2, 0.35, 0.3};
    t.g_slopes = {-0.3, -0.1, -0.25, -0.2};
  }
  return t;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int run_inner(int argc, const char* const* argv) {
  CLI::App app{"clone-commons: mines change histories into clone events and fits "
               "zero-inflated negative-binomial multilevel models of team behavior"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values");

  // ---- ingest ----
  auto* c_ingest = app.add_subcommand("ingest", "derive clone events from a change log");
  std::string in_log, in_org, in_metrics, in_out = "events.csv";
  c_ingest->add_option("--log", in_log, "change-log CSV")->required();
  c_ingest->add_option("--org", in_org, "org-chart JSON")->required();
  c_ingest->add_option("--metrics", in_metrics, "per-commit metrics CSV")->required();
  c_ingest->add_option("--out", in_out, "events CSV to write");

  // ---- metrics ----
  auto* c_metrics = app.add_subcommand("metrics", "measure a source tree snapshot");
  std::string m_root, m_repo, m_hash, m_out = "metrics.csv", m_ext = ".java";
  int m_window = 10;
  bool m_append = false;
  c_metrics->add_option("--root", m_root, "tree to measure")->required();
  c_metrics->add_option("--repo", m_repo, "repository id")->required();
  c_metrics->add_option("--hash", m_hash, "commit hash of the checkout")->required();
  c_metrics->add_option("--window", m_window, "duplicate window length (normalized lines)");
  c_metrics->add_option("--ext", m_ext, "comma-separated file extensions");
  c_metrics->add_option("--out", m_out, "metrics CSV to write");
  c_metrics->add_flag("--append", m_append, "append rows to an existing CSV");

  // ---- simulate ----
  auto* c_sim = app.add_subcommand("simulate", "generate a synthetic dataset from the model");
  std::string s_model = "m0", s_outcome, s_out = "sim";
  int s_teams = 5, s_repos = 4, s_n = 5000;
  std::uint64_t s_seed = 1;
  c_sim->add_option("--model", s_model, "m0|m1|m2|m3");
  c_sim->add_option("--teams", s_teams, "number of teams");
  c_sim->add_option("--repos", s_repos, "number of repositories");
  c_sim->add_option("--n", s_n, "observations");
  c_sim->add_option("--seed", s_seed, "rng seed");
  c_sim->add_option("--outcome", s_outcome, "introduced|removed");
  c_sim->add_option("--out", s_out, "output directory");

  // ---- fit ----
  auto* c_fit = app.add_subcommand("fit", "fit a model with the built-in HMC sampler");
  std::string f_data, f_dataset, f_model = "m0", f_outcome, f_attr = "committer";
  std::string f_priors, f_out = "fit";
  ChainConfig f_cfg;
  c_fit->add_option("--data", f_data, "events CSV");
  c_fit->add_option("--dataset", f_dataset, "directory with dataset.json/dataset.csv");
  c_fit->add_option("--model", f_model, "m0|m1|m2|m3");
  c_fit->add_option("--outcome", f_outcome, "introduced|removed (default per model)");
  c_fit->add_option("--attribution", f_attr, "committer|author");
  c_fit->add_option("--chains", f_cfg.chains, "number of chains");
  c_fit->add_option("--warmup", f_cfg.warmup, "warmup iterations per chain");
  c_fit->add_option("--samples", f_cfg.samples, "sampling iterations per chain");
  c_fit->add_option("--seed", f_cfg.seed, "rng seed");
  c_fit->add_option("--target-accept", f_cfg.target_accept, "dual-averaging target");
  c_fit->add_option("--max-treedepth", f_cfg.max_treedepth, "trajectory doubling cap");
  c_fit->add_option("--threads", f_cfg.threads, "parallel chains (0 = auto)");
  c_fit->add_option("--priors", f_priors, "prior configuration JSON");
  c_fit->add_option("--out", f_out, "output directory");

  // ---- diagnose ----
  auto* c_diag = app.add_subcommand("diagnose", "convergence, rootogram, and PPC statistics");
  std::string d_fit, d_out = "diagnostics";
  int d_max_count = 30, d_stride = 4, d_prior_draws = 200;
  std::uint64_t d_seed = 0;
  c_diag->add_option("--fit", d_fit, "fit directory")->required();
  c_diag->add_option("--max-count", d_max_count, "rootogram bin cap");
  c_diag->add_option("--stride", d_stride, "use every k-th draw for replicates");
  c_diag->add_option("--prior-draws", d_prior_draws, "prior predictive draws (0 disables)");
  c_diag->add_option("--seed", d_seed, "rng seed for replicates");
  c_diag->add_option("--out", d_out, "output directory");

  // ---- loo ----
  auto* c_loo = app.add_subcommand("loo", "PSIS-LOO per model and a comparison table");
  std::vector<std::string> l_fits;
  std::string l_models, l_fits_dir = "fits", l_out = "loo";
  bool l_reloo = false;
  c_loo->add_option("--fit", l_fits, "name=fit-dir (repeatable)");
  c_loo->add_option("--models", l_models, "comma list; fits read from <fits-dir>/<name>");
  c_loo->add_option("--fits-dir", l_fits_dir, "parent directory for --models");
  c_loo->add_flag("--reloo", l_reloo, "refit exactly for flagged observations");
  c_loo->add_option("--out", l_out, "output directory");

  // ---- predict ----
  auto* c_pred = app.add_subcommand("predict", "posterior predictions for a scenario");
  std::string p_fit, p_request, p_quantity = "prob-at-least-one", p_team = "AVERAGE",
              p_repo, p_vary = "comp", p_out = "predictions";
  double p_add = 143, p_rem = 92, p_comp = 282, p_dup = 36;  // canonical large change
  int p_max_count = 20, p_reps = 1, p_grid = 25;
  double p_level = 0.89;
  std::uint64_t p_seed = 0;
  c_pred->add_option("--fit", p_fit, "fit directory")->required();
  c_pred->add_option("--request", p_request, "request JSON");
  c_pred->add_option("--quantity", p_quantity,
                     "prob-at-least-one|cumulative|predictive|conditional-effects");
  c_pred->add_option("--team", p_team, "team name, AVERAGE, or NEW");
  c_pred->add_option("--repo", p_repo, "repository name");
  c_pred->add_option("--add", p_add, "added lines");
  c_pred->add_option("--rem", p_rem, "removed lines");
  c_pred->add_option("--comp", p_comp, "file complexity");
  c_pred->add_option("--dup", p_dup, "existing duplicates");
  c_pred->add_option("--vary", p_vary, "add|rem|comp|dup (conditional effects)");
  c_pred->add_option("--grid", p_grid, "grid points (conditional effects)");
  c_pred->add_option("--max-count", p_max_count, "cumulative curve cap");
  c_pred->add_option("--reps", p_reps, "replicates per draw (predictive)");
  c_pred->add_option("--level", p_level, "credible interval level");
  c_pred->add_option("--seed", p_seed, "rng seed");
  c_pred->add_option("--out", p_out, "output directory");

  // ---- ocam ----
  auto* c_ocam = app.add_subcommand("ocam", "contribution metrics and per-repo team ranks");
  std::string o_log, o_org, o_metrics, o_attr = "committer", o_out = "ocam.csv";
  c_ocam->add_option("--log", o_log, "change-log CSV")->required();
  c_ocam->add_option("--org", o_org, "org-chart JSON")->required();
  c_ocam->add_option("--metrics", o_metrics, "per-commit metrics CSV")->required();
  c_ocam->add_option("--attribution", o_attr, "committer|author");
  c_ocam->add_option("--out", o_out, "output CSV");

  // ---- report ----
  auto* c_rep = app.add_subcommand("report", "render a figure as SVG + backing CSV");
  std::string r_figure, r_fit, r_teams, r_repo, r_out = "report", r_vary = "comp";
  double r_add = 370, r_rem = 311, r_comp = 282, r_dup = 36;  // Q99 change, Q95 file
  int r_max_count = 20, r_stride = 4, r_grid = 25;
  double r_level = 0.89;
  std::uint64_t r_seed = 0;
  c_rep->add_option("--figure", r_figure,
                    "rootogram|prob-at-least-one|cumulative|conditional-effects|ppc-zeros")
      ->required();
  c_rep->add_option("--fit", r_fit, "fit directory")->required();
  c_rep->add_option("--teams", r_teams, "comma list (default: all teams + AVERAGE)");
  c_rep->add_option("--repo", r_repo, "repository (cumulative/conditional effects)");
  c_rep->add_option("--add", r_add, "added lines");
  c_rep->add_option("--rem", r_rem, "removed lines");
  c_rep->add_option("--comp", r_comp, "file complexity");
  c_rep->add_option("--dup", r_dup, "existing duplicates");
  c_rep->add_option("--vary", r_vary, "varying predictor (conditional effects)");
  c_rep->add_option("--grid", r_grid, "grid points");
  c_rep->add_option("--max-count", r_max_count, "count cap");
  c_rep->add_option("--stride", r_stride, "draw stride for replicates");
  c_rep->add_option("--level", r_level, "credible interval level");
  c_rep->add_option("--seed", r_seed, "rng seed");
  c_rep->add_option("--out", r_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  // Config file defaults for sampler settings (flags win).
  if (!config_path.empty()) {
    nlohmann::json cfg;
    try {
      cfg = nlohmann::json::parse(read_text_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("config JSON: ") + e.what());
    }
    auto maybe = [&](const char* flag, auto& target) {
      auto* opt = c_fit->get_option(flag);
      if (opt->count() == 0 && cfg.contains(opt->get_name().substr(2)))
        target = cfg.at(opt->get_name().substr(2));
    };
    maybe("--chains", f_cfg.chains);
    maybe("--warmup", f_cfg.warmup);
    maybe("--samples", f_cfg.samples);
    maybe("--seed", f_cfg.seed);
    maybe("--target-accept", f_cfg.target_accept);
    maybe("--max-treedepth", f_cfg.max_treedepth);
  }

  if (*c_ingest) {
    RunManifest man;
    man.subcommand = "ingest";
    man.add_input(in_log);
    man.add_input(in_org);
    man.add_input(in_metrics);
    man.config = {{"log", in_log}, {"org", in_org}, {"metrics", in_metrics}};
    IngestReport report;
    auto commits = parse_change_log_text(read_text_file(in_log), &report);
    auto charts = parse_org_charts(read_text_file(in_org));
    auto metrics = parse_metrics_csv_text(read_text_file(in_metrics));
    auto events = derive_events(commits, metrics, charts);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    write_text_file(in_out, events_to_csv(events, man.csv_comment()));
    std::cout << "wrote " << events.size() << " events to " << in_out << "\n";
    return 0;
  }

  if (*c_metrics) {
    RunManifest man;
    man.subcommand = "metrics";
    man.config = {{"root", m_root},     {"repo", m_repo}, {"hash", m_hash},
                  {"window", std::to_string(m_window)},   {"ext", m_ext}};
    auto rows = measure_tree(m_root, split_list(m_ext), m_window);
    std::string out;
    if (!m_append) {
      out += man.csv_comment() + "\n";
      out += "repo,hash,file_path,complexity,duplicated_blocks\n";
    } else if (fs::exists(m_out)) {
      out = read_text_file(m_out);
    }
    for (const auto& r : rows)
      out += join_csv({m_repo, m_hash, r.file_path, std::to_string(r.complexity),
                       std::to_string(r.duplicated_blocks)}) + "\n";
    write_text_file(m_out, out);
    std::cout << "measured " << rows.size() << " files into " << m_out << "\n";
    return 0;
  }

  if (*c_sim) {
    ModelSpec spec;
    spec.kind = model_kind_from_string(s_model);
    const OutcomeKind outcome =
        s_outcome.empty() ? spec.default_outcome() : outcome_kind_from_string(s_outcome);
    RunManifest man;
    man.subcommand = "simulate";
    man.seed = s_seed;
    man.config = {{"model", s_model},
                  {"teams", std::to_string(s_teams)},
                  {"repos", std::to_string(s_repos)},
                  {"n", std::to_string(s_n)},
                  {"outcome", to_string(outcome)},
                  {"seed", std::to_string(s_seed)}};
    const TruthConfig truth = default_truth(spec);
    SimulatedData sim = simulate_dataset(spec, truth, {s_teams, s_repos, s_n}, outcome, s_seed);
    ensure_dir(s_out);
    write_text_file(path_join(s_out, "dataset.json"), sim.dataset.to_json(man.to_json()));
    write_text_file(path_join(s_out, "dataset.csv"), sim.dataset.to_csv(man.csv_comment()));
    nlohmann::json tj;
    tj["model"] = s_model;
    tj["truth_unconstrained"] = sim.truth;
    tj["parameter_names"] = sim.layout.names();
    tj["manifest"] = nlohmann::json::parse(man.to_json());
    write_text_file(path_join(s_out, "truth.json"), tj.dump(2) + "\n");
    std::cout << "simulated " << s_n << " observations into " << s_out << "\n";
    return 0;
  }

  if (*c_fit) {
    ModelSpec spec;
    spec.kind = model_kind_from_string(f_model);
    if (!f_priors.empty()) spec.priors = PriorConfig::from_json(read_text_file(f_priors));
    RunManifest man;
    man.subcommand = "fit";
    man.seed = f_cfg.seed;
    man.config = {{"model", f_model},
                  {"chains", std::to_string(f_cfg.chains)},
                  {"warmup", std::to_string(f_cfg.warmup)},
                  {"samples", std::to_string(f_cfg.samples)},
                  {"seed", std::to_string(f_cfg.seed)},
                  {"target_accept", format_double(f_cfg.target_accept)},
                  {"max_treedepth", std::to_string(f_cfg.max_treedepth)},
                  {"attribution", f_attr}};

    Dataset dataset;
    if (!f_dataset.empty()) {
      man.add_input(path_join(f_dataset, "dataset.csv"));
      dataset = load_dataset_dir(f_dataset);
      if (!f_outcome.empty() &&
          outcome_kind_from_string(f_outcome) != dataset.outcome_kind)
        throw ValidationError("--outcome conflicts with the stored dataset outcome");
    } else if (!f_data.empty()) {
      man.add_input(f_data);
      std::istringstream in(read_text_file(f_data));
      auto events = events_from_csv(in);
      const OutcomeKind outcome =
          f_outcome.empty() ? spec.default_outcome() : outcome_kind_from_string(f_outcome);
      if (spec.kind == ModelKind::M3 && outcome != OutcomeKind::Removed)
        throw ValidationError("model m3 targets the removed-clone outcome");
      const Attribution attr =
          f_attr == "author" ? Attribution::Author : Attribution::Committer;
      dataset = build_dataset(events, outcome, attr);
    } else {
      throw ValidationError("fit needs --data or --dataset");
    }
    man.config["outcome"] = to_string(dataset.outcome_kind);

    SampleBatch batch = fit_model(dataset, spec, f_cfg);
    FitSummary summary = summarize_fit(batch);
    ensure_dir(f_out);
    write_text_file(path_join(f_out, "dataset.json"), dataset.to_json(man.to_json()));
    write_text_file(path_join(f_out, "dataset.csv"), dataset.to_csv(man.csv_comment()));
    write_text_file(path_join(f_out, "draws.csv"), draws_to_csv(batch, man.csv_comment()));
    write_text_file(path_join(f_out, "summary.json"),
                    fit_summary_to_json(summary, batch, spec, man.to_json()));
    std::cout << "fit " << f_model << ": " << summary.n_draws << " draws, max R-hat "
              << format_double(summary.max_rhat) << ", divergent " << summary.n_divergent
              << "; wrote " << f_out << "\n";
    return 0;
  }

  if (*c_diag) {
    FitArtifacts fa = load_fit_dir(d_fit);
    RunManifest man;
    man.subcommand = "diagnose";
    man.seed = d_seed;
    man.add_input(path_join(d_fit, "draws.csv"));
    man.config = {{"fit", d_fit},
                  {"max_count", std::to_string(d_max_count)},
                  {"stride", std::to_string(d_stride)},
                  {"prior_draws", std::to_string(d_prior_draws)},
                  {"seed", std::to_string(d_seed)}};

    SampleBatch thinned = fa.batch;
    for (auto& chain : thinned.chains) {
      std::vector<std::vector<double>> kept;
      for (std::size_t i = 0; i < chain.draws.size(); i += d_stride)
        kept.push_back(chain.draws[i]);
      chain.draws = std::move(kept);
    }
    auto reps = replicate_outcomes(thinned, fa.dataset, fa.spec, d_seed);
    std::vector<long> observed;
    for (const auto& o : fa.dataset.observations) observed.push_back(o.y);

    ensure_dir(d_out);
    RootogramData rg = rootogram(observed, reps, d_max_count);
    FigureOutput rg_fig = render_rootogram(rg, "suspended rootogram", man.to_json());
    write_text_file(path_join(d_out, "rootogram.csv"), rg_fig.csv);

    nlohmann::json ppc;
    for (auto stat : {PpcStatistic::PropZero, PpcStatistic::Q95, PpcStatistic::Q99}) {
      PpcResult r = ppc_stat(observed, reps, stat);
      auto [lo, hi] = central_interval(r.draws, 0.95);
      ppc[to_string(stat)] = {{"observed", r.observed},
                              {"mean", mean(r.draws)},
                              {"lo95", lo},
                              {"hi95", hi}};
    }
    // Prior predictive check: q95/q99 pairs from prior draws at the training
    // design, alongside the observed pair.
    if (d_prior_draws > 0) {
      const ParamLayout layout =
          ParamLayout::make(fa.spec, fa.dataset.n_teams(), fa.dataset.n_teamrepo());
      SampleBatch prior_batch;
      prior_batch.chains.resize(1);
      for (int i = 0; i < d_prior_draws; ++i)
        prior_batch.chains[0].draws.push_back(
            sample_prior(fa.spec, layout, d_seed * 1000003 + i));
      auto prior_reps = replicate_outcomes(prior_batch, fa.dataset, fa.spec, d_seed + 1);
      PpcResult q95 = ppc_stat(observed, prior_reps, PpcStatistic::Q95);
      PpcResult q99 = ppc_stat(observed, prior_reps, PpcStatistic::Q99);
      std::string csv = man.csv_comment() + "\nkind,q95,q99\n";
      for (std::size_t i = 0; i < q95.draws.size(); ++i)
        csv += "prior," + format_double(q95.draws[i]) + ',' + format_double(q99.draws[i]) + '\n';
      csv += "observed," + format_double(q95.observed) + ',' + format_double(q99.observed) + '\n';
      write_text_file(path_join(d_out, "prior_pc.csv"), csv);
    }

    // The DAG's implied conditional independencies, with bootstrap intervals.
    nlohmann::json independence = nlohmann::json::array();
    for (const auto& claim : conditional_independence_report(fa.dataset, 2000, d_seed + 2)) {
      independence.push_back({{"claim", claim.name},
                              {"skipped", claim.skipped},
                              {"correlation", claim.correlation},
                              {"boot_mean", claim.boot_mean},
                              {"ci_low", claim.ci_low},
                              {"ci_high", claim.ci_high},
                              {"n_obs", claim.n_obs}});
    }

    FitSummary summary = summarize_fit(fa.batch);
    nlohmann::json out;
    out["ppc"] = ppc;
    out["conditional_independence"] = independence;
    out["max_rhat"] = summary.max_rhat;
    out["min_ess"] = summary.min_ess;
    out["n_divergent"] = summary.n_divergent;
    out["manifest"] = nlohmann::json::parse(man.to_json());
    write_text_file(path_join(d_out, "diagnostics.json"), out.dump(2) + "\n");
    std::cout << "diagnostics written to " << d_out << "\n";
    return 0;
  }

  if (*c_loo) {
    std::vector<std::pair<std::string, std::string>> fit_dirs;
    for (const auto& kv : l_fits) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ValidationError("--fit expects name=dir, got " + kv);
      fit_dirs.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& name : split_list(l_models))
      fit_dirs.emplace_back(name, path_join(l_fits_dir, name));
    if (fit_dirs.empty()) throw ValidationError("loo needs --fit name=dir or --models");

    RunManifest man;
    man.subcommand = "loo";
    for (const auto& [name, dir] : fit_dirs) {
      man.config[name] = dir;
      man.add_input(path_join(dir, "draws.csv"));
    }

    ensure_dir(l_out);
    std::vector<std::string> names;
    std::vector<LooResult> results;
    for (const auto& [name, dir] : fit_dirs) {
      FitArtifacts fa = load_fit_dir(dir);
      auto log_lik = pointwise_log_lik(fa.batch, fa.dataset, fa.spec);
      LooResult loo = psis_loo(log_lik);
      if (l_reloo && !loo.flagged.empty()) {
        ChainConfig refit_cfg = fa.batch.config;
        refit_cfg.chains = std::max(2, refit_cfg.chains / 2);
        RelooResult rl = reloo(loo, [&](int idx) {
          Dataset without = fa.dataset;
          without.observations.erase(without.observations.begin() + idx);
          SampleBatch refit = fit_model(without, fa.spec, refit_cfg);
          FitSummary s = summarize_fit(refit);
          RefitOutcome outc;
          outc.max_rhat = s.max_rhat;
          outc.converged = s.max_rhat < 1.05;
          Dataset held;
          held = fa.dataset;
          held.observations = {fa.dataset.observations[idx]};
          auto ll = pointwise_log_lik(refit, held, fa.spec);
          std::vector<double> col(ll.size());
          for (std::size_t s2 = 0; s2 < ll.size(); ++s2) col[s2] = ll[s2][0];
          outc.elpd_i = log_sum_exp(col) - std::log(static_cast<double>(col.size()));
          return outc;
        });
        for (int idx : rl.nonconverged)
          std::cerr << "warning: reloo refit for observation " << idx << " did not converge\n";
        loo = rl.corrected;
      }
      names.push_back(name);
      results.push_back(loo);

      nlohmann::json j;
      j["model"] = name;
      j["elpd_loo"] = loo.elpd;
      j["se"] = loo.se;
      j["n_flagged"] = loo.flagged.size();
      j["flagged"] = loo.flagged;
      j["manifest"] = nlohmann::json::parse(man.to_json());
      write_text_file(path_join(l_out, "loo_" + name + ".json"), j.dump(2) + "\n");
      std::string csv = man.csv_comment() + "\nobservation,elpd,pareto_k\n";
      for (std::size_t i = 0; i < loo.pointwise.size(); ++i)
        csv += std::to_string(i) + ',' + format_double(loo.pointwise[i]) + ',' +
               format_double(loo.pareto_k[i]) + '\n';
      write_text_file(path_join(l_out, "loo_" + name + ".csv"), csv);
    }

    auto rows = compare_models(names, results);
    std::string csv = man.csv_comment() + "\nmodel,elpd_loo,elpd_diff,se_diff\n";
    std::ostringstream table;
    table << "Model  elpd_diff  se_diff\n";
    for (const auto& row : rows) {
      csv += join_csv({row.name, format_double(row.elpd), format_double(row.elpd_diff),
                       format_double(row.se_diff)}) + "\n";
      char line[128];
      std::snprintf(line, sizeof(line), "%-6s %9.1f %8.1f\n", row.name.c_str(), row.elpd_diff,
                    row.se_diff);
      table << line;
    }
    write_text_file(path_join(l_out, "comparison.csv"), csv);
    std::cout << table.str();
    return 0;
  }

  if (*c_pred) {
    FitArtifacts fa = load_fit_dir(p_fit);
    PredictorSetting setting;
    setting.add = p_add;
    setting.rem = p_rem;
    setting.comp = p_comp;
    setting.dup = p_dup;
    setting.team = p_team;
    setting.repo = p_repo;
    std::string quantity = p_quantity;
    if (!p_request.empty()) {
      nlohmann::json req;
      try {
        req = nlohmann::json::parse(read_text_file(p_request));
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("request JSON: ") + e.what());
      }
      setting.team = req.value("team", setting.team);
      setting.repo = req.value("repo", setting.repo);
      setting.add = req.value("add", setting.add);
      setting.rem = req.value("rem", setting.rem);
      setting.comp = req.value("comp", setting.comp);
      setting.dup = req.value("dup", setting.dup);
      quantity = req.value("quantity", quantity);
    }
    if (setting.repo.empty() && !setting.average()) {
      if (fa.dataset.repo_names.empty()) throw ValidationError("no repositories in the dataset");
      setting.repo = fa.dataset.repo_names.front();
    }

    RunManifest man;
    man.subcommand = "predict";
    man.seed = p_seed;
    man.add_input(path_join(p_fit, "draws.csv"));
    man.config = {{"quantity", quantity},
                  {"team", setting.team},
                  {"repo", setting.repo},
                  {"add", format_double(setting.add)},
                  {"rem", format_double(setting.rem)},
                  {"comp", format_double(setting.comp)},
                  {"dup", format_double(setting.dup)},
                  {"seed", std::to_string(p_seed)}};

    ensure_dir(p_out);
    nlohmann::json j;
    j["quantity"] = quantity;
    j["setting"] = {{"team", setting.team},  {"repo", setting.repo}, {"add", setting.add},
                    {"rem", setting.rem},    {"comp", setting.comp}, {"dup", setting.dup}};
    std::string csv = man.csv_comment() + "\n";

    if (quantity == "prob-at-least-one") {
      IntervalSummary s = prob_at_least_one(setting, fa.batch, fa.dataset, fa.spec, p_level,
                                            p_seed);
      j["estimate"] = s.estimate;
      j["lo"] = s.lo;
      j["hi"] = s.hi;
      j["level"] = s.level;
      csv += "estimate,lo,hi\n" + format_double(s.estimate) + ',' + format_double(s.lo) + ',' +
             format_double(s.hi) + '\n';
    } else if (quantity == "cumulative") {
      auto curve = cumulative_curve(setting, fa.batch, fa.dataset, fa.spec, p_max_count, p_level,
                                    p_seed);
      csv += "count,estimate,lo,hi\n";
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& pt : curve) {
        csv += std::to_string(pt.count) + ',' + format_double(pt.prob.estimate) + ',' +
               format_double(pt.prob.lo) + ',' + format_double(pt.prob.hi) + '\n';
        arr.push_back({{"count", pt.count},
                       {"estimate", pt.prob.estimate},
                       {"lo", pt.prob.lo},
                       {"hi", pt.prob.hi}});
      }
      j["curve"] = arr;
    } else if (quantity == "predictive") {
      auto samples = posterior_predict(setting, fa.batch, fa.dataset, fa.spec, p_reps, p_seed);
      csv += "sample\n";
      for (long v : samples) csv += std::to_string(v) + '\n';
      std::vector<double> vals(samples.begin(), samples.end());
      j["mean"] = mean(vals);
      j["q95"] = percentile_nearest_rank(vals, 0.95);
      j["q99"] = percentile_nearest_rank(vals, 0.99);
    } else if (quantity == "conditional-effects") {
      int vary = -1;
      for (int p = 0; p < kNumPredictors; ++p) {
        static const char* raw_names[] = {"add", "rem", "comp", "dup"};
        if (p_vary == raw_names[p]) vary = p;
      }
      if (vary < 0) throw ValidationError("--vary must be add|rem|comp|dup");
      double x_hi = 1.0;
      for (const auto& o : fa.dataset.observations)
        x_hi = std::max(x_hi, fa.dataset.standardization.unstandardize(vary, o.x[vary]));
      auto grid = conditional_effects(setting, vary, 0.0, x_hi, p_grid, fa.batch, fa.dataset,
                                      fa.spec, p_level, p_seed);
      csv += p_vary + ",estimate,lo,hi\n";
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& pt : grid) {
        csv += format_double(pt.x_raw) + ',' + format_double(pt.expected.estimate) + ',' +
               format_double(pt.expected.lo) + ',' + format_double(pt.expected.hi) + '\n';
        arr.push_back({{"x", pt.x_raw},
                       {"estimate", pt.expected.estimate},
                       {"lo", pt.expected.lo},
                       {"hi", pt.expected.hi}});
      }
      j["grid"] = arr;
    } else {
      throw ValidationError("unknown quantity: " + quantity);
    }
    j["manifest"] = nlohmann::json::parse(man.to_json());
    write_text_file(path_join(p_out, "prediction.json"), j.dump(2) + "\n");
    write_text_file(path_join(p_out, "prediction.csv"), csv);
    std::cout << "prediction written to " << p_out << "\n";
    return 0;
  }

  if (*c_ocam) {
    RunManifest man;
    man.subcommand = "ocam";
    man.add_input(o_log);
    man.add_input(o_org);
    man.add_input(o_metrics);
    man.config = {{"log", o_log}, {"org", o_org}, {"metrics", o_metrics},
                  {"attribution", o_attr}};
    auto commits = parse_change_log_text(read_text_file(o_log));
    auto charts = parse_org_charts(read_text_file(o_org));
    auto metrics = parse_metrics_csv_text(read_text_file(o_metrics));
    auto events = derive_events(commits, metrics, charts);
    OcamTable table = ocam_metrics(
        events, o_attr == "author" ? Attribution::Author : Attribution::Committer);
    ocam_rank(table);
    write_text_file(o_out, ocam_to_csv(table, man.csv_comment()));
    std::cout << "wrote " << table.rows.size() << " team-repo rows to " << o_out << "\n";
    return 0;
  }

  if (*c_rep) {
    FitArtifacts fa = load_fit_dir(r_fit);
    RunManifest man;
    man.subcommand = "report";
    man.seed = r_seed;
    man.add_input(path_join(r_fit, "draws.csv"));
    man.config = {{"figure", r_figure}, {"teams", r_teams}, {"repo", r_repo},
                  {"add", format_double(r_add)}, {"rem", format_double(r_rem)},
                  {"comp", format_double(r_comp)}, {"dup", format_double(r_dup)},
                  {"seed", std::to_string(r_seed)}};

    std::vector<std::string> teams =
        r_teams.empty() ? fa.dataset.team_names : split_list(r_teams);
    if (r_teams.empty()) teams.push_back("AVERAGE");
    if (teams.empty()) throw ValidationError("empty team selection");
    for (const auto& t : teams)
      if (t != "AVERAGE" && t != "NEW" &&
          std::find(fa.dataset.team_names.begin(), fa.dataset.team_names.end(), t) ==
              fa.dataset.team_names.end())
        throw ValidationError("unknown team in --teams: " + t);

    auto scenario = [&](const std::string& team, const std::string& repo) {
      PredictorSetting s;
      s.add = r_add;
      s.rem = r_rem;
      s.comp = r_comp;
      s.dup = r_dup;
      s.team = team;
      s.repo = repo;
      return s;
    };

    ensure_dir(r_out);
    FigureOutput fig;
    if (r_figure == "rootogram") {
      SampleBatch thinned = fa.batch;
      for (auto& chain : thinned.chains) {
        std::vector<std::vector<double>> kept;
        for (std::size_t i = 0; i < chain.draws.size(); i += r_stride)
          kept.push_back(chain.draws[i]);
        chain.draws = std::move(kept);
      }
      auto reps = replicate_outcomes(thinned, fa.dataset, fa.spec, r_seed);
      std::vector<long> observed;
      for (const auto& o : fa.dataset.observations) observed.push_back(o.y);
      fig = render_rootogram(rootogram(observed, reps, r_max_count), "suspended rootogram",
                             man.to_json());
    } else if (r_figure == "prob-at-least-one") {
      std::vector<ProbPanelRow> rows;
      for (const auto& repo : fa.dataset.repo_names) {
        for (const auto& team : teams) {
          IntervalSummary s = prob_at_least_one(scenario(team, repo), fa.batch, fa.dataset,
                                                fa.spec, r_level, r_seed);
          rows.push_back({repo, team, s.estimate, s.lo, s.hi});
        }
      }
      fig = render_prob_panel(rows, "probability of introducing at least one clone",
                              man.to_json());
    } else if (r_figure == "cumulative") {
      const std::string repo = r_repo.empty() ? fa.dataset.repo_names.front() : r_repo;
      std::vector<CurvePoint> points;
      for (const auto& team : teams) {
        auto curve = cumulative_curve(scenario(team, repo), fa.batch, fa.dataset, fa.spec,
                                      r_max_count, r_level, r_seed);
        for (const auto& pt : curve)
          points.push_back({team, static_cast<double>(pt.count), pt.prob.estimate, pt.prob.lo,
                            pt.prob.hi});
      }
      fig = render_curves(points, "cumulative probability in " + repo, "count",
                          "P(y <= count)", man.to_json());
    } else if (r_figure == "conditional-effects") {
      const std::string repo = r_repo.empty() ? fa.dataset.repo_names.front() : r_repo;
      int vary = -1;
      for (int p = 0; p < kNumPredictors; ++p) {
        static const char* raw_names[] = {"add", "rem", "comp", "dup"};
        if (r_vary == raw_names[p]) vary = p;
      }
      if (vary < 0) throw ValidationError("--vary must be add|rem|comp|dup");
      double x_hi = 1.0;
      for (const auto& o : fa.dataset.observations)
        x_hi = std::max(x_hi, fa.dataset.standardization.unstandardize(vary, o.x[vary]));
      std::vector<CurvePoint> points;
      for (const auto& team : teams) {
        auto grid = conditional_effects(scenario(team, repo), vary, 0.0, x_hi, r_grid, fa.batch,
                                        fa.dataset, fa.spec, r_level, r_seed);
        for (const auto& pt : grid)
          points.push_back({team, pt.x_raw, pt.expected.estimate, pt.expected.lo,
                            pt.expected.hi});
      }
      fig = render_curves(points, "expected introduced clones in " + repo, r_vary,
                          "expected count", man.to_json());
    } else if (r_figure == "ppc-zeros") {
      SampleBatch thinned = fa.batch;
      for (auto& chain : thinned.chains) {
        std::vector<std::vector<double>> kept;
        for (std::size_t i = 0; i < chain.draws.size(); i += r_stride)
          kept.push_back(chain.draws[i]);
        chain.draws = std::move(kept);
      }
      auto reps = replicate_outcomes(thinned, fa.dataset, fa.spec, r_seed);
      std::vector<long> observed;
      for (const auto& o : fa.dataset.observations) observed.push_back(o.y);
      PpcResult r = ppc_stat(observed, reps, PpcStatistic::PropZero);
      HistogramData h;
      h.values = r.draws;
      h.observed = r.observed;
      fig = render_histogram(h, "posterior predictive proportion of zeros", "prop_zero",
                             man.to_json());
    } else {
      throw ValidationError("unknown figure: " + r_figure);
    }
    write_text_file(path_join(r_out, r_figure + ".svg"), fig.svg);
    write_text_file(path_join(r_out, r_figure + ".csv"), fig.csv);
    std::cout << "figure written to " << r_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  try {
    return run_inner(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ccm
