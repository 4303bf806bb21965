#include "ccm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ccm/csv.hpp"
#include "ccm/errors.hpp"
#include "ccm/math.hpp"
#include "ccm/rng.hpp"

namespace ccm {

std::string to_string(OutcomeKind k) {
  return k == OutcomeKind::Introduced ? "introduced" : "removed";
}

OutcomeKind outcome_kind_from_string(const std::string& s) {
  if (s == "introduced") return OutcomeKind::Introduced;
  if (s == "removed") return OutcomeKind::Removed;
  throw ValidationError("unknown outcome kind: " + s);
}

std::pair<std::vector<double>, PredictorParams> log1p_standardize(
    const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("cannot standardize empty sequence");
  std::vector<double> logs(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) logs[i] = std::log1p(values[i]);
  PredictorParams p;
  p.mean = mean(logs);
  double ss = 0.0;
  for (double v : logs) ss += (v - p.mean) * (v - p.mean);
  if (values.size() < 2 || ss == 0.0)
    throw ValidationError("degenerate predictor: all values equal");
  p.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  for (double& v : logs) v = (v - p.mean) / p.sd;
  return {std::move(logs), p};
}

int Dataset::teamrepo_index(int team, int repo) const {
  auto it = std::lower_bound(teamrepo_cells.begin(), teamrepo_cells.end(),
                             std::make_pair(team, repo));
  if (it == teamrepo_cells.end() || *it != std::make_pair(team, repo)) return -1;
  return static_cast<int>(it - teamrepo_cells.begin());
}

Dataset build_dataset(const std::vector<FileChangeEvent>& events, OutcomeKind outcome,
                      Attribution attribution) {
  if (events.empty()) throw ValidationError("cannot build dataset from zero events");

  auto team_of = [&](const FileChangeEvent& e) -> const std::string& {
    return attribution == Attribution::Committer ? e.team_committer : e.team_author;
  };

  std::set<std::string> teams, repos;
  for (const auto& e : events) {
    teams.insert(team_of(e));
    repos.insert(e.repo);
  }

  Dataset ds;
  ds.outcome_kind = outcome;
  ds.team_names.assign(teams.begin(), teams.end());
  ds.repo_names.assign(repos.begin(), repos.end());

  auto index_of = [](const std::vector<std::string>& names, const std::string& v) {
    return static_cast<int>(std::lower_bound(names.begin(), names.end(), v) - names.begin());
  };

  std::set<std::pair<int, int>> cells;
  for (const auto& e : events)
    cells.insert({index_of(ds.team_names, team_of(e)), index_of(ds.repo_names, e.repo)});
  ds.teamrepo_cells.assign(cells.begin(), cells.end());

  std::vector<double> raw[kNumPredictors];
  for (const auto& e : events) {
    raw[0].push_back(static_cast<double>(e.add));
    raw[1].push_back(static_cast<double>(e.rem));
    raw[2].push_back(static_cast<double>(e.comp));
    raw[3].push_back(static_cast<double>(e.dup_prev));
  }
  std::vector<double> std_cols[kNumPredictors];
  for (int p = 0; p < kNumPredictors; ++p) {
    try {
      auto [col, params] = log1p_standardize(raw[p]);
      std_cols[p] = std::move(col);
      ds.standardization.per[p] = params;
    } catch (const ValidationError&) {
      throw ValidationError(std::string("degenerate predictor ") + kPredictorNames[p] +
                            ": all values equal");
    }
  }

  ds.observations.reserve(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    Observation o;
    o.y = outcome == OutcomeKind::Introduced ? e.introduced : e.fixed;
    for (int p = 0; p < kNumPredictors; ++p) o.x[p] = std_cols[p][i];
    o.team = index_of(ds.team_names, team_of(e));
    o.repo = index_of(ds.repo_names, e.repo);
    o.teamrepo = ds.teamrepo_index(o.team, o.repo);
    ds.observations.push_back(o);
  }
  return ds;
}

std::string Dataset::to_json(const std::string& manifest_json) const {
  nlohmann::json j;
  j["layout_version"] = 1;
  j["outcome_kind"] = to_string(outcome_kind);
  j["teams"] = team_names;
  j["repos"] = repo_names;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [t, r] : teamrepo_cells) cells.push_back({t, r});
  j["teamrepo_cells"] = cells;
  nlohmann::json st;
  for (int p = 0; p < kNumPredictors; ++p) {
    st[kPredictorNames[p]] = {{"mean", standardization.per[p].mean},
                              {"sd", standardization.per[p].sd}};
  }
  j["standardization"] = st;
  if (!manifest_json.empty()) j["manifest"] = nlohmann::json::parse(manifest_json);
  return j.dump(2) + "\n";
}

std::string Dataset::to_csv(const std::string& manifest_comment) const {
  std::string out;
  if (!manifest_comment.empty()) out += manifest_comment + "\n";
  out += "y,A,R,C,D,team,repo,teamrepo\n";
  for (const auto& o : observations) {
    out += std::to_string(o.y);
    for (int p = 0; p < kNumPredictors; ++p) {
      out += ',';
      out += format_double(o.x[p]);
    }
    out += ',' + std::to_string(o.team) + ',' + std::to_string(o.repo) + ',' +
           std::to_string(o.teamrepo) + '\n';
  }
  return out;
}

Dataset Dataset::load(const std::string& json_text, const std::string& csv_text) {
  Dataset ds;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("dataset JSON: ") + e.what());
  }
  ds.outcome_kind = outcome_kind_from_string(j.at("outcome_kind").get<std::string>());
  ds.team_names = j.at("teams").get<std::vector<std::string>>();
  ds.repo_names = j.at("repos").get<std::vector<std::string>>();
  for (const auto& cell : j.at("teamrepo_cells"))
    ds.teamrepo_cells.emplace_back(cell[0].get<int>(), cell[1].get<int>());
  for (int p = 0; p < kNumPredictors; ++p) {
    const auto& st = j.at("standardization").at(kPredictorNames[p]);
    ds.standardization.per[p].mean = st.at("mean").get<double>();
    ds.standardization.per[p].sd = st.at("sd").get<double>();
  }

  std::istringstream in(csv_text);
  CsvFile csv = read_csv(in);
  static const std::vector<std::string> kHeader = {"y",    "A",    "R",        "C",
                                                   "D",    "team", "repo",     "teamrepo"};
  if (csv.header != kHeader) throw ValidationError("dataset CSV header mismatch");
  for (const auto& row : csv.rows) {
    if (row.size() != kHeader.size()) throw ValidationError("dataset CSV: bad field count");
    Observation o;
    o.y = std::stol(row[0]);
    for (int p = 0; p < kNumPredictors; ++p) o.x[p] = std::strtod(row[1 + p].c_str(), nullptr);
    o.team = std::stoi(row[5]);
    o.repo = std::stoi(row[6]);
    o.teamrepo = std::stoi(row[7]);
    ds.observations.push_back(o);
  }
  return ds;
}

std::vector<IndependenceClaim> conditional_independence_report(const Dataset& ds, int bootstrap,
                                                               std::uint64_t seed) {
  struct ClaimDef {
    const char* name;
    int a, b;  // predictor columns
  };
  static const ClaimDef defs[] = {{"R_indep_C_given_team", 1, 2}, {"R_indep_D_given_team", 1, 3}};

  // Teams with at least two observations take part in the pooled correlation.
  std::vector<int> team_counts(ds.team_names.size(), 0);
  for (const auto& o : ds.observations) ++team_counts[o.team];
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.observations.size(); ++i)
    if (team_counts[ds.observations[i].team] >= 2) keep.push_back(i);

  auto pooled_corr = [&](int a, int b, const std::vector<std::size_t>& idx) -> double {
    std::vector<double> suma(ds.team_names.size(), 0.0), sumb(ds.team_names.size(), 0.0);
    std::vector<int> cnt(ds.team_names.size(), 0);
    for (auto i : idx) {
      const auto& o = ds.observations[i];
      suma[o.team] += o.x[a];
      sumb[o.team] += o.x[b];
      ++cnt[o.team];
    }
    double sab = 0, saa = 0, sbb = 0;
    for (auto i : idx) {
      const auto& o = ds.observations[i];
      if (cnt[o.team] < 2) continue;
      const double ra = o.x[a] - suma[o.team] / cnt[o.team];
      const double rb = o.x[b] - sumb[o.team] / cnt[o.team];
      sab += ra * rb;
      saa += ra * ra;
      sbb += rb * rb;
    }
    if (saa <= 0 || sbb <= 0) return 0.0;
    return sab / std::sqrt(saa * sbb);
  };

  std::vector<IndependenceClaim> out;
  for (const auto& def : defs) {
    IndependenceClaim claim;
    claim.name = def.name;
    claim.n_obs = static_cast<int>(keep.size());
    if (keep.size() < 3) {
      claim.skipped = true;
      out.push_back(std::move(claim));
      continue;
    }
    claim.correlation = pooled_corr(def.a, def.b, keep);
    Rng rng(seed, static_cast<std::uint64_t>(def.a * 16 + def.b));
    std::vector<double> boots;
    boots.reserve(bootstrap);
    std::vector<std::size_t> sample(keep.size());
    for (int rep = 0; rep < bootstrap; ++rep) {
      for (auto& s : sample) s = keep[rng.uniform_int(keep.size())];
      boots.push_back(pooled_corr(def.a, def.b, sample));
    }
    claim.boot_mean = mean(boots);
    auto [lo, hi] = central_interval(boots, 0.95);
    claim.ci_low = lo;
    claim.ci_high = hi;
    out.push_back(std::move(claim));
  }
  return out;
}

}  // namespace ccm
