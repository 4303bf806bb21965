#include "ccm/ocam.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ccm/csv.hpp"
#include "ccm/math.hpp"

namespace ccm {

OcamTable ocam_metrics(const std::vector<FileChangeEvent>& events, Attribution attribution) {
  std::map<std::pair<std::string, std::string>, OcamRow> rows;  // (repo, team)
  std::set<std::tuple<std::string, std::string, std::string>> commits_seen;

  for (const auto& e : events) {
    const std::string& team =
        attribution == Attribution::Committer ? e.team_committer : e.team_author;
    OcamRow& row = rows[{e.repo, team}];
    row.repo = e.repo;
    row.team = team;
    if (commits_seen.insert({e.repo, team, e.hash}).second) ++row.n_commit;
    row.churn += std::max(e.add, e.rem);
    const long delta = e.comp - e.comp_prev;
    if (delta > 0) row.add_comp += delta;
    else row.rem_comp += -delta;
  }

  OcamTable out;
  for (auto& [key, row] : rows) out.rows.push_back(std::move(row));
  return out;
}

namespace {

// Average-rank ties, descending values (rank 1 = highest).
void assign_ranks(std::vector<OcamRow*>& rows, long OcamRow::*value, double OcamRow::*rank) {
  std::sort(rows.begin(), rows.end(),
            [&](const OcamRow* a, const OcamRow* b) { return a->*value > b->*value; });
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j]->*value == rows[i]->*value) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) rows[k]->*rank = avg;
    i = j;
  }
}

}  // namespace

void ocam_rank(OcamTable& table) {
  std::map<std::string, std::vector<OcamRow*>> by_repo;
  for (auto& row : table.rows) by_repo[row.repo].push_back(&row);
  for (auto& [repo, rows] : by_repo) {
    assign_ranks(rows, &OcamRow::n_commit, &OcamRow::rank_n_commit);
    assign_ranks(rows, &OcamRow::churn, &OcamRow::rank_churn);
    assign_ranks(rows, &OcamRow::add_comp, &OcamRow::rank_add_comp);
    assign_ranks(rows, &OcamRow::rem_comp, &OcamRow::rank_rem_comp);
  }
}

std::string ocam_to_csv(const OcamTable& table, const std::string& manifest_comment) {
  std::string out;
  if (!manifest_comment.empty()) out += manifest_comment + "\n";
  out += "repo,team,metric,value,rank\n";
  struct Metric {
    const char* name;
    long OcamRow::*value;
    double OcamRow::*rank;
  };
  static const Metric metrics[] = {{"n_commit", &OcamRow::n_commit, &OcamRow::rank_n_commit},
                                   {"churn", &OcamRow::churn, &OcamRow::rank_churn},
                                   {"add_comp", &OcamRow::add_comp, &OcamRow::rank_add_comp},
                                   {"rem_comp", &OcamRow::rem_comp, &OcamRow::rank_rem_comp}};
  for (const auto& row : table.rows) {
    for (const auto& m : metrics) {
      out += join_csv({row.repo, row.team, m.name, std::to_string(row.*(m.value)),
                       format_double(row.*(m.rank))});
      out += '\n';
    }
  }
  return out;
}

}  // namespace ccm
