#include "doctest.h"

#include <map>
#include <sstream>

#include "ccm/errors.hpp"
#include "ccm/ingest.hpp"

using namespace ccm;

namespace {

const char* kHeader =
    "repo,hash,author_id,author_date,committer_id,committer_date,file_path,added,removed\n";

std::vector<OrgChartSnapshot> toy_charts() {
  return parse_org_charts(R"([
    {"valid_from":"2020-01-01","teams":{"Red":["alice"],"Blue":["bob"]}},
    {"valid_from":"2021-01-01","teams":{"Blue":["alice","bob"]}}
  ])");
}

}  // namespace

TEST_CASE("parse_change_log maps a plain row") {
  std::string text = std::string(kHeader) +
                     "r1,abc,alice,2020-01-02T00:00:00Z,bob,2020-01-03T00:00:00Z,src/A.java,10,4\n";
  auto commits = parse_change_log_text(text);
  REQUIRE(commits.size() == 1);
  CHECK(commits[0].repo == "r1");
  CHECK(commits[0].hash == "abc");
  CHECK(commits[0].author_id == "alice");
  CHECK(commits[0].committer_id == "bob");
  REQUIRE(commits[0].file_changes.size() == 1);
  CHECK(commits[0].file_changes[0].added == 10);
  CHECK(commits[0].file_changes[0].removed == 4);
  CHECK(format_rfc3339(commits[0].author_date) == "2020-01-02T00:00:00Z");
}

TEST_CASE("binary marker becomes zero counts with a warning") {
  std::string text = std::string(kHeader) +
                     "r1,abc,alice,2020-01-02T00:00:00Z,bob,2020-01-03T00:00:00Z,img.png,-,-\n";
  IngestReport report;
  auto commits = parse_change_log_text(text, &report);
  REQUIRE(commits.size() == 1);
  CHECK(commits[0].file_changes[0].added == 0);
  CHECK(commits[0].file_changes[0].removed == 0);
  CHECK(commits[0].file_changes[0].binary);
  CHECK(!report.warnings.empty());
}

TEST_CASE("empty input gives an empty sequence") {
  CHECK(parse_change_log_text("").empty());
  CHECK(parse_change_log_text(kHeader).empty());
}

TEST_CASE("malformed rows and duplicate hashes are errors with line numbers") {
  std::string bad = std::string(kHeader) +
                    "r1,abc,alice,2020-01-02T00:00:00Z,bob,2020-01-03T00:00:00Z,f.java,x,4\n";
  CHECK_THROWS_WITH_AS(parse_change_log_text(bad), doctest::Contains("line 2"), ValidationError);

  std::string dup = std::string(kHeader) +
                    "r1,abc,alice,2020-01-02T00:00:00Z,bob,2020-01-03T00:00:00Z,a.java,1,0\n"
                    "r1,def,alice,2020-01-04T00:00:00Z,bob,2020-01-05T00:00:00Z,b.java,1,0\n"
                    "r1,abc,alice,2020-01-02T00:00:00Z,bob,2020-01-03T00:00:00Z,c.java,1,0\n";
  CHECK_THROWS_AS(parse_change_log_text(dup), ValidationError);
}

TEST_CASE("find_team resolves snapshots in time") {
  auto charts = toy_charts();
  CHECK(find_team("alice", parse_date("2020-06-01"), charts) == "Red");
  // boundary date uses the new snapshot
  CHECK(find_team("alice", parse_date("2021-01-01"), charts) == "Blue");
  CHECK(find_team("mallory", parse_date("2022-06-01"), charts) == "Unknown");
  CHECK(find_team("alice", parse_date("2019-01-01"), charts) == "Unknown");
}

TEST_CASE("find_team agrees with a linear-scan oracle") {
  auto charts = toy_charts();
  auto oracle = [&](const std::string& who, Timestamp t) -> std::string {
    std::string team = "Unknown";
    for (const auto& c : charts) {
      if (c.valid_from <= t) {
        auto it = c.membership.find(who);
        team = it == c.membership.end() ? "Unknown" : it->second;
      }
    }
    return team;
  };
  for (int day = 0; day < 1200; day += 17) {
    const Timestamp t = parse_date("2019-06-01") + day * 86400LL;
    for (const auto* who : {"alice", "bob", "mallory"})
      CHECK(find_team(who, t, charts) == oracle(who, t));
  }
}

namespace {

struct ToyHistory {
  std::vector<CommitRecord> commits;
  std::vector<FileMetricsSnapshot> metrics;
};

// One repo, one file, dup trajectory 0 -> 2 -> 5 -> 1.
ToyHistory dup_trajectory() {
  ToyHistory h;
  const char* hashes[] = {"h1", "h2", "h3"};
  const long dups[] = {2, 5, 1};
  Timestamp t = parse_date("2020-02-01");
  for (int i = 0; i < 3; ++i) {
    CommitRecord c;
    c.repo = "r1";
    c.hash = hashes[i];
    c.author_id = "alice";
    c.committer_id = "bob";
    c.author_date = t;
    c.committer_date = t + 3600;
    c.file_changes.push_back({"src/A.java", 10, 2, false});
    h.commits.push_back(c);
    FileMetricsSnapshot s;
    s.repo = "r1";
    s.hash = hashes[i];
    s.per_file["src/A.java"] = {7, dups[i]};
    h.metrics.push_back(s);
    t += 86400;
  }
  return h;
}

}  // namespace

TEST_CASE("introduced and fixed follow the dup delta") {
  auto h = dup_trajectory();
  auto charts = toy_charts();
  auto events = derive_introductions(h.commits, h.metrics, charts);
  REQUIRE(events.size() == 3);
  // new file: dup_prev 0, dup_curr 2
  CHECK(events[0].dup_prev == 0);
  CHECK(events[0].introduced == 2);
  CHECK(events[0].fixed == 0);
  // 2 -> 5
  CHECK(events[1].dup_prev == 2);
  CHECK(events[1].introduced == 3);
  CHECK(events[1].fixed == 0);
  // 5 -> 1
  CHECK(events[2].dup_prev == 5);
  CHECK(events[2].introduced == 0);
  CHECK(events[2].fixed == 4);
  // attribution fields
  CHECK(events[0].team_author == "Red");
  CHECK(events[0].team_committer == "Blue");

  auto removals = derive_removals(h.commits, h.metrics, charts);
  REQUIRE(removals.size() == 3);
  CHECK(removals[2].fixed == 4);
}

TEST_CASE("event invariants hold") {
  auto h = dup_trajectory();
  auto events = derive_events(h.commits, h.metrics, toy_charts());
  long telescoped = 0;
  for (const auto& e : events) {
    CHECK(e.introduced * e.fixed == 0);
    CHECK(e.introduced >= 0);
    CHECK(e.fixed >= 0);
    telescoped += e.introduced - e.fixed;
  }
  // final dup (1) minus initial (0)
  CHECK(telescoped == 1);
}

TEST_CASE("new file with zero dups introduces nothing") {
  ToyHistory h;
  CommitRecord c;
  c.repo = "r1";
  c.hash = "h1";
  c.author_id = "alice";
  c.committer_id = "alice";
  c.author_date = c.committer_date = parse_date("2020-03-01");
  c.file_changes.push_back({"src/New.java", 30, 0, false});
  h.commits.push_back(c);
  FileMetricsSnapshot s;
  s.repo = "r1";
  s.hash = "h1";
  s.per_file["src/New.java"] = {3, 0};
  h.metrics.push_back(s);
  auto events = derive_events(h.commits, h.metrics, toy_charts());
  REQUIRE(events.size() == 1);
  CHECK(events[0].dup_prev == 0);
  CHECK(events[0].introduced == 0);
  CHECK(events[0].fixed == 0);
}

TEST_CASE("missing snapshot for a commit is an error listing hashes") {
  auto h = dup_trajectory();
  h.metrics.pop_back();
  CHECK_THROWS_WITH_AS(derive_events(h.commits, h.metrics, toy_charts()),
                       doctest::Contains("h3"), ValidationError);
}

TEST_CASE("ingestion is deterministic and round-trips through CSV") {
  auto h = dup_trajectory();
  auto events1 = derive_events(h.commits, h.metrics, toy_charts());
  auto events2 = derive_events(h.commits, h.metrics, toy_charts());
  const std::string csv1 = events_to_csv(events1);
  CHECK(csv1 == events_to_csv(events2));

  std::istringstream in(csv1);
  auto loaded = events_from_csv(in);
  REQUIRE(loaded.size() == events1.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].file_path == events1[i].file_path);
    CHECK(loaded[i].introduced == events1[i].introduced);
    CHECK(loaded[i].fixed == events1[i].fixed);
    CHECK(loaded[i].dup_prev == events1[i].dup_prev);
  }
}

TEST_CASE("org chart validation") {
  CHECK_THROWS_AS(parse_org_charts(R"([{"valid_from":"2020-01-01",
      "teams":{"Red":["alice"],"Blue":["alice"]}}])"),
                  ValidationError);
  CHECK_THROWS_AS(parse_org_charts(R"([
      {"valid_from":"2020-02-01","teams":{}},
      {"valid_from":"2020-01-01","teams":{}}])"),
                  ValidationError);
}
