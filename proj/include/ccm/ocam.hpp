#pragma once

#include <string>
#include <vector>

#include "ccm/dataset.hpp"

namespace ccm {

struct OcamRow {
  std::string repo;
  std::string team;
  long n_commit = 0;
  long churn = 0;      // sum of max(added, removed) per changed file
  long add_comp = 0;   // positive complexity deltas
  long rem_comp = 0;   // negative complexity deltas (absolute)
  // Descending ranks per repo per metric; ties get the average rank.
  double rank_n_commit = 0;
  double rank_churn = 0;
  double rank_add_comp = 0;
  double rank_rem_comp = 0;
};

struct OcamTable {
  std::vector<OcamRow> rows;  // sorted by (repo, team)
};

// Contribution metric values per (team, repo); commits counted once per
// (team, repo, hash).
OcamTable ocam_metrics(const std::vector<FileChangeEvent>& events,
                       Attribution attribution = Attribution::Committer);

// Fills the rank columns (1 = highest contribution).
void ocam_rank(OcamTable& table);

std::string ocam_to_csv(const OcamTable& table, const std::string& manifest_comment = "");

}  // namespace ccm
