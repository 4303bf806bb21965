#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ccm/ingest.hpp"

namespace ccm {

enum class OutcomeKind { Introduced, Removed };
enum class Attribution { Committer, Author };

std::string to_string(OutcomeKind k);
OutcomeKind outcome_kind_from_string(const std::string& s);

// Predictor order is fixed everywhere: A, R, C, D.
inline constexpr int kNumPredictors = 4;
inline constexpr const char* kPredictorNames[kNumPredictors] = {"A", "R", "C", "D"};

struct PredictorParams {
  double mean = 0.0;  // mean of log1p(raw)
  double sd = 1.0;    // sample sd (n-1) of log1p(raw)
};

struct StandardizationParams {
  PredictorParams per[kNumPredictors];

  double standardize(int pred, double raw) const {
    return (std::log1p(raw) - per[pred].mean) / per[pred].sd;
  }
  double unstandardize(int pred, double z) const {
    return std::expm1(z * per[pred].sd + per[pred].mean);
  }
};

// log1p, then center and scale to unit sample sd. Errors on all-equal input.
std::pair<std::vector<double>, PredictorParams> log1p_standardize(
    const std::vector<double>& values);

struct Observation {
  long y = 0;
  double x[kNumPredictors] = {0, 0, 0, 0};  // standardized A, R, C, D
  int team = 0;
  int repo = 0;
  int teamrepo = 0;
};

struct Dataset {
  std::vector<Observation> observations;
  std::vector<std::string> team_names;  // sorted
  std::vector<std::string> repo_names;  // sorted
  // Observed (team, repo) cells, sorted by (team, repo); index = position.
  std::vector<std::pair<int, int>> teamrepo_cells;
  StandardizationParams standardization;
  OutcomeKind outcome_kind = OutcomeKind::Introduced;

  int n_teams() const { return static_cast<int>(team_names.size()); }
  int n_repos() const { return static_cast<int>(repo_names.size()); }
  int n_teamrepo() const { return static_cast<int>(teamrepo_cells.size()); }
  int n_obs() const { return static_cast<int>(observations.size()); }

  int teamrepo_index(int team, int repo) const;  // -1 when the cell is unseen

  std::string to_json(const std::string& manifest_json = "") const;
  std::string to_csv(const std::string& manifest_comment = "") const;
  static Dataset load(const std::string& json_text, const std::string& csv_text);
};

Dataset build_dataset(const std::vector<FileChangeEvent>& events, OutcomeKind outcome,
                      Attribution attribution = Attribution::Committer);

struct IndependenceClaim {
  std::string name;         // e.g. "R_indep_C_given_team"
  bool skipped = false;     // too few observations
  double correlation = 0.0; // point estimate on the full data
  double boot_mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n_obs = 0;
};

// Within-team-pooled correlations for the DAG's implied independencies
// (R against C, and R against D), with a seeded bootstrap interval.
std::vector<IndependenceClaim> conditional_independence_report(const Dataset& ds,
                                                               int bootstrap = 2000,
                                                               std::uint64_t seed = 2021);

}  // namespace ccm
