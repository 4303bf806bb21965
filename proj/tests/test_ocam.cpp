#include "doctest.h"

#include "ccm/ocam.hpp"

using namespace ccm;

namespace {

FileChangeEvent ev(const std::string& repo, const std::string& team, const std::string& hash,
                   long add, long rem, long comp_prev, long comp) {
  FileChangeEvent e;
  e.repo = repo;
  e.hash = hash;
  e.file_path = "f";
  e.team_author = team;
  e.team_committer = team;
  e.add = add;
  e.rem = rem;
  e.comp_prev = comp_prev;
  e.comp = comp;
  return e;
}

}  // namespace

TEST_CASE("churn takes the max of added and removed per file") {
  OcamTable t = ocam_metrics({ev("r1", "Red", "h1", 10, 4, 0, 0)});
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].churn == 10);
  CHECK(t.rows[0].n_commit == 1);
}

TEST_CASE("complexity deltas split into added and removed parts") {
  OcamTable t = ocam_metrics({ev("r1", "Red", "h1", 1, 1, 16, 21)});
  CHECK(t.rows[0].add_comp == 5);
  CHECK(t.rows[0].rem_comp == 0);
  OcamTable t2 = ocam_metrics({ev("r1", "Red", "h1", 1, 1, 21, 16)});
  CHECK(t2.rows[0].add_comp == 0);
  CHECK(t2.rows[0].rem_comp == 5);
}

TEST_CASE("commits count once per (team, repo, hash) and absent cells stay absent") {
  OcamTable t = ocam_metrics({
      ev("r1", "Red", "h1", 5, 1, 0, 2),
      ev("r1", "Red", "h1", 7, 2, 0, 3),  // same commit, second file
      ev("r1", "Red", "h2", 1, 9, 3, 1),
      ev("r2", "Blue", "h3", 4, 4, 0, 0),
  });
  REQUIRE(t.rows.size() == 2);
  const OcamRow& red = t.rows[0].team == "Red" ? t.rows[0] : t.rows[1];
  CHECK(red.n_commit == 2);
  CHECK(red.churn == 5 + 7 + 9);
  // no Red row for r2, no Blue row for r1
  for (const auto& row : t.rows) CHECK((row.repo == "r1") == (row.team == "Red"));
}

TEST_CASE("ranks are descending with average ties") {
  OcamTable t = ocam_metrics({
      ev("r1", "A", "h1", 10, 0, 0, 0),
      ev("r1", "B", "h2", 5, 0, 0, 0),
      ev("r1", "C", "h3", 1, 0, 0, 0),
  });
  ocam_rank(t);
  auto rank_of = [&](const std::string& team) {
    for (const auto& row : t.rows)
      if (row.team == team) return row.rank_churn;
    return -1.0;
  };
  CHECK(rank_of("A") == 1.0);
  CHECK(rank_of("B") == 2.0);
  CHECK(rank_of("C") == 3.0);

  OcamTable tie = ocam_metrics({
      ev("r1", "A", "h1", 10, 0, 0, 0),
      ev("r1", "B", "h2", 10, 0, 0, 0),
      ev("r1", "C", "h3", 1, 0, 0, 0),
  });
  ocam_rank(tie);
  auto tie_rank = [&](const std::string& team) {
    for (const auto& row : tie.rows)
      if (row.team == team) return row.rank_churn;
    return -1.0;
  };
  CHECK(tie_rank("A") == 1.5);
  CHECK(tie_rank("B") == 1.5);
  CHECK(tie_rank("C") == 3.0);
}

TEST_CASE("a single team ranks first") {
  OcamTable t = ocam_metrics({ev("r1", "Solo", "h1", 3, 3, 0, 0)});
  ocam_rank(t);
  CHECK(t.rows[0].rank_churn == 1.0);
  CHECK(t.rows[0].rank_n_commit == 1.0);
}

TEST_CASE("ranks are permutations and churn sums are conserved") {
  std::vector<FileChangeEvent> events;
  const char* teams[] = {"A", "B", "C", "D"};
  long total_churn = 0;
  int h = 0;
  for (const char* team : teams) {
    for (int i = 0; i < 3; ++i) {
      const long add = (i + 1) * 7 % 13, rem = (i + 2) * 5 % 11;
      events.push_back(ev("r1", team, "h" + std::to_string(h++), add, rem, i, i + 2));
      total_churn += std::max(add, rem);
    }
  }
  OcamTable t = ocam_metrics(events);
  ocam_rank(t);
  double rank_sum = 0;
  long churn_sum = 0;
  for (const auto& row : t.rows) {
    rank_sum += row.rank_churn;
    churn_sum += row.churn;
  }
  const double n = static_cast<double>(t.rows.size());
  CHECK(rank_sum == doctest::Approx(n * (n + 1) / 2.0));
  CHECK(churn_sum == total_churn);
}

TEST_CASE("csv output carries one row per metric") {
  OcamTable t = ocam_metrics({ev("r1", "Red", "h1", 2, 1, 0, 1)});
  ocam_rank(t);
  const std::string csv = ocam_to_csv(t, "# manifest={}");
  CHECK(csv.find("# manifest=") == 0);
  CHECK(csv.find("repo,team,metric,value,rank") != std::string::npos);
  CHECK(csv.find("r1,Red,churn,2,1") != std::string::npos);
}
