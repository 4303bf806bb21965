#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ccm/clone_metrics.hpp"
#include "ccm/dataset.hpp"
#include "ccm/diagnostics.hpp"
#include "ccm/fit.hpp"
#include "ccm/ingest.hpp"
#include "ccm/math.hpp"
#include "ccm/model.hpp"
#include "ccm/predict.hpp"
#include "ccm/sampler.hpp"

namespace py = pybind11;
using namespace ccm;

namespace {

// Wraps a fitted model: dataset + spec + draws travel together so the
// downstream operations stay consistent.
struct Fit {
  Dataset dataset;
  ModelSpec spec;
  SampleBatch batch;
};

ModelSpec spec_of(const std::string& kind) {
  ModelSpec spec;
  spec.kind = model_kind_from_string(kind);
  return spec;
}

std::vector<std::vector<double>> matrix_from_numpy(py::array_t<double, py::array::c_style> arr) {
  if (arr.ndim() != 2) throw py::value_error("expected a 2-d array");
  std::vector<std::vector<double>> out(arr.shape(0), std::vector<double>(arr.shape(1)));
  auto r = arr.unchecked<2>();
  for (py::ssize_t i = 0; i < arr.shape(0); ++i)
    for (py::ssize_t j = 0; j < arr.shape(1); ++j) out[i][j] = r(i, j);
  return out;
}

PredictorSetting setting_from_dict(const py::dict& d) {
  PredictorSetting s;
  s.team = d.contains("team") ? d["team"].cast<std::string>() : "AVERAGE";
  s.repo = d.contains("repo") ? d["repo"].cast<std::string>() : "";
  s.add = d.contains("add") ? d["add"].cast<double>() : 0.0;
  s.rem = d.contains("rem") ? d["rem"].cast<double>() : 0.0;
  s.comp = d.contains("comp") ? d["comp"].cast<double>() : 0.0;
  s.dup = d.contains("dup") ? d["dup"].cast<double>() : 0.0;
  return s;
}

}  // namespace

PYBIND11_MODULE(clonecommons, m) {
  m.doc() = "clone event mining and zero-inflated negative-binomial team models";

  m.def("zinb_log_pmf", &zinb_log_pmf, py::arg("y"), py::arg("mu"), py::arg("phi"),
        py::arg("xi"));

  m.def("log1p_standardize", [](const std::vector<double>& values) {
    auto [stdized, params] = log1p_standardize(values);
    return py::make_tuple(stdized, params.mean, params.sd);
  });

  m.def("cyclomatic_complexity", &cyclomatic_complexity, py::arg("source"));

  m.def("normalize_lines", [](const std::string& source) {
    return normalize("<memory>", source).lines;
  });

  m.def(
      "duplicate_blocks",
      [](const std::map<std::string, std::string>& sources, int window) {
        std::vector<NormalizedFile> files;
        DuplicateIndex index(window);
        for (const auto& [path, text] : sources) {
          files.push_back(normalize(path, text));
          index.add_file(files.back());
        }
        std::map<std::string, int> out;
        for (const auto& f : files) out[f.file_path] = count_duplicate_blocks(f, index);
        return out;
      },
      py::arg("sources"), py::arg("window") = 10);

  m.def("find_team", [](const std::string& person, const std::string& date,
                        const std::string& org_json) {
    return find_team(person, parse_date(date), parse_org_charts(org_json));
  });

  m.def("derive_events", [](const std::string& log_csv, const std::string& org_json,
                            const std::string& metrics_csv) {
    auto events = derive_events(parse_change_log_text(log_csv), parse_metrics_csv_text(metrics_csv),
                                parse_org_charts(org_json));
    py::list out;
    for (const auto& e : events) {
      py::dict d;
      d["repo"] = e.repo;
      d["hash"] = e.hash;
      d["file_path"] = e.file_path;
      d["team_author"] = e.team_author;
      d["team_committer"] = e.team_committer;
      d["add"] = e.add;
      d["rem"] = e.rem;
      d["comp"] = e.comp;
      d["dup_prev"] = e.dup_prev;
      d["introduced"] = e.introduced;
      d["fixed"] = e.fixed;
      out.append(d);
    }
    return out;
  });

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("n_obs", &Dataset::n_obs)
      .def_property_readonly("teams", [](const Dataset& d) { return d.team_names; })
      .def_property_readonly("repos", [](const Dataset& d) { return d.repo_names; })
      .def("outcomes",
           [](const Dataset& d) {
             std::vector<long> y;
             for (const auto& o : d.observations) y.push_back(o.y);
             return y;
           })
      .def("to_json", [](const Dataset& d) { return d.to_json(); })
      .def("to_csv", [](const Dataset& d) { return d.to_csv(); });

  m.def(
      "simulate_dataset",
      [](const std::string& model, int teams, int repos, int n, std::uint64_t seed) {
        ModelSpec spec = spec_of(model);
        TruthConfig truth;
        truth.b0 = -2.0;
        truth.g0 = 1.0;
        const std::size_t k = spec.population_slopes().size();
        truth.b_slopes.assign(k, 0.3);
        truth.g_slopes.assign(k, -0.2);
        return simulate_dataset(spec, truth, {teams, repos, n}, spec.default_outcome(), seed)
            .dataset;
      },
      py::arg("model") = "m0", py::arg("teams") = 3, py::arg("repos") = 2, py::arg("n") = 500,
      py::arg("seed") = 1);

  m.def("load_dataset", &Dataset::load, py::arg("json_text"), py::arg("csv_text"));

  py::class_<Fit>(m, "Fit")
      .def_property_readonly("param_names",
                             [](const Fit& f) { return f.batch.param_names; })
      .def_property_readonly("n_divergent",
                             [](const Fit& f) {
                               int n = 0;
                               for (const auto& c : f.batch.chains) n += c.n_divergent;
                               return n;
                             })
      .def("draws",
           [](const Fit& f) {
             const int total = f.batch.n_draws_total();
             const int dim = static_cast<int>(f.batch.param_names.size());
             py::array_t<double> arr({total, dim});
             auto w = arr.mutable_unchecked<2>();
             int row = 0;
             for (const auto& chain : f.batch.chains)
               for (const auto& d : chain.draws) {
                 for (int j = 0; j < dim; ++j) w(row, j) = d[j];
                 ++row;
               }
             return arr;
           })
      .def("summary",
           [](const Fit& f) {
             FitSummary s = summarize_fit(f.batch);
             py::dict out;
             out["max_rhat"] = s.max_rhat;
             out["min_ess"] = s.min_ess;
             out["n_divergent"] = s.n_divergent;
             out["n_draws"] = s.n_draws;
             py::dict params;
             for (const auto& p : s.unconstrained) {
               py::dict row;
               row["mean"] = p.mean;
               row["sd"] = p.sd;
               row["rhat"] = p.rhat;
               row["ess"] = p.ess;
               params[p.name.c_str()] = row;
             }
             out["parameters"] = params;
             return out;
           })
      .def("log_lik",
           [](const Fit& f) {
             auto ll = pointwise_log_lik(f.batch, f.dataset, f.spec);
             py::array_t<double> arr(
                 {static_cast<py::ssize_t>(ll.size()),
                  static_cast<py::ssize_t>(ll.empty() ? 0 : ll[0].size())});
             auto w = arr.mutable_unchecked<2>();
             for (std::size_t i = 0; i < ll.size(); ++i)
               for (std::size_t j = 0; j < ll[i].size(); ++j)
                 w(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j)) = ll[i][j];
             return arr;
           })
      .def("prob_at_least_one",
           [](const Fit& f, const py::dict& setting, double level, std::uint64_t seed) {
             IntervalSummary s = prob_at_least_one(setting_from_dict(setting), f.batch,
                                                   f.dataset, f.spec, level, seed);
             py::dict out;
             out["estimate"] = s.estimate;
             out["lo"] = s.lo;
             out["hi"] = s.hi;
             return out;
           },
           py::arg("setting"), py::arg("level") = 0.89, py::arg("seed") = 0)
      .def("posterior_predict",
           [](const Fit& f, const py::dict& setting, int n_rep, std::uint64_t seed) {
             return posterior_predict(setting_from_dict(setting), f.batch, f.dataset, f.spec,
                                      n_rep, seed);
           },
           py::arg("setting"), py::arg("n_rep") = 1, py::arg("seed") = 0);

  m.def(
      "fit",
      [](const Dataset& dataset, const std::string& model, int chains, int warmup, int samples,
         std::uint64_t seed, double target_accept) {
        Fit f;
        f.dataset = dataset;
        f.spec = spec_of(model);
        ChainConfig cfg;
        cfg.chains = chains;
        cfg.warmup = warmup;
        cfg.samples = samples;
        cfg.seed = seed;
        cfg.target_accept = target_accept;
        f.batch = fit_model(dataset, f.spec, cfg);
        return f;
      },
      py::arg("dataset"), py::arg("model") = "m0", py::arg("chains") = 2,
      py::arg("warmup") = 300, py::arg("samples") = 300, py::arg("seed") = 1,
      py::arg("target_accept") = 0.8);

  m.def("split_rhat", [](const std::vector<std::vector<double>>& chains) {
    return split_rhat(chains).value;
  });
  m.def("ess", [](const std::vector<std::vector<double>>& chains) {
    return ess(chains).value;
  });

  m.def("gpd_fit_tail", [](std::vector<double> tail) {
    GpdFit f = gpd_fit_tail(std::move(tail));
    return py::make_tuple(f.k, f.sigma, f.degenerate);
  });

  m.def("psis_loo", [](py::array_t<double, py::array::c_style> log_lik) {
    LooResult r = psis_loo(matrix_from_numpy(log_lik));
    py::dict out;
    out["elpd"] = r.elpd;
    out["se"] = r.se;
    out["pointwise"] = r.pointwise;
    out["pareto_k"] = r.pareto_k;
    out["flagged"] = r.flagged;
    return out;
  });

  m.def(
      "rootogram",
      [](const std::vector<long>& observed, const std::vector<std::vector<long>>& predictive,
         int max_count) {
        RootogramData rg = rootogram(observed, predictive, max_count);
        py::list bins;
        for (const auto& b : rg.bins) {
          py::dict d;
          d["count"] = b.count;
          d["expected"] = b.expected;
          d["observed"] = b.observed;
          d["deviation"] = b.deviation;
          bins.append(d);
        }
        return bins;
      },
      py::arg("observed"), py::arg("predictive"), py::arg("max_count") = 20);

  m.def(
      "ppc_stat",
      [](const std::vector<long>& observed, const std::vector<std::vector<long>>& predictive,
         const std::string& stat) {
        PpcResult r = ppc_stat(observed, predictive, ppc_statistic_from_string(stat));
        return py::make_tuple(r.draws, r.observed);
      },
      py::arg("observed"), py::arg("predictive"), py::arg("stat") = "prop_zero");
}
