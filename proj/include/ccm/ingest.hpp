#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace ccm {

// Epoch seconds, UTC.
using Timestamp = std::int64_t;

Timestamp parse_rfc3339(const std::string& text);
Timestamp parse_date(const std::string& text);  // YYYY-MM-DD at 00:00:00 UTC
std::string format_rfc3339(Timestamp t);
std::string format_date(Timestamp t);

struct FileChange {
  std::string file_path;
  long added = 0;
  long removed = 0;
  bool binary = false;  // "-" marker in the log
};

struct CommitRecord {
  std::string repo;
  std::string hash;
  std::string author_id;
  Timestamp author_date = 0;
  std::string committer_id;
  Timestamp committer_date = 0;
  std::vector<FileChange> file_changes;
};

struct OrgChartSnapshot {
  Timestamp valid_from = 0;
  std::map<std::string, std::string> membership;  // author_id -> team
};

struct FileMetrics {
  long complexity = 0;
  long duplicated_blocks = 0;
};

struct FileMetricsSnapshot {
  std::string repo;
  std::string hash;
  std::map<std::string, FileMetrics> per_file;
};

struct FileChangeEvent {
  std::string repo;
  std::string hash;
  std::string file_path;
  std::string team_author;
  std::string team_committer;
  long add = 0;
  long rem = 0;
  long comp = 0;      // post-change complexity
  long dup_prev = 0;  // duplicates before the change
  long introduced = 0;
  long fixed = 0;
  long comp_prev = 0;  // in-memory only; feeds the contribution metrics
};

struct IngestReport {
  std::vector<std::string> warnings;
};

// Change-log CSV: repo,hash,author_id,author_date,committer_id,committer_date,
// file_path,added,removed. One row per file change; commits are consecutive
// row blocks sharing (repo, hash).
std::vector<CommitRecord> parse_change_log(std::istream& in, IngestReport* report = nullptr);
std::vector<CommitRecord> parse_change_log_text(const std::string& text, IngestReport* report = nullptr);

// Org-chart JSON: [{"valid_from":"YYYY-MM-DD","teams":{"Red":["alice",...]}}]
std::vector<OrgChartSnapshot> parse_org_charts(const std::string& json_text);

// Metrics CSV: repo,hash,file_path,complexity,duplicated_blocks
std::vector<FileMetricsSnapshot> parse_metrics_csv(std::istream& in);
std::vector<FileMetricsSnapshot> parse_metrics_csv_text(const std::string& text);

// Latest snapshot with valid_from <= at_date; "Unknown" when the person is
// absent or the date precedes all snapshots. Total by construction.
std::string find_team(const std::string& person_id, Timestamp at_date,
                      const std::vector<OrgChartSnapshot>& charts);

std::vector<FileChangeEvent> derive_events(const std::vector<CommitRecord>& commits,
                                           const std::vector<FileMetricsSnapshot>& metrics,
                                           const std::vector<OrgChartSnapshot>& charts);
// Same table, named per the two collection passes they realize.
std::vector<FileChangeEvent> derive_introductions(const std::vector<CommitRecord>& commits,
                                                  const std::vector<FileMetricsSnapshot>& metrics,
                                                  const std::vector<OrgChartSnapshot>& charts);
std::vector<FileChangeEvent> derive_removals(const std::vector<CommitRecord>& commits,
                                             const std::vector<FileMetricsSnapshot>& metrics,
                                             const std::vector<OrgChartSnapshot>& charts);

std::string events_to_csv(const std::vector<FileChangeEvent>& events,
                          const std::string& manifest_comment = "");
std::vector<FileChangeEvent> events_from_csv(std::istream& in);

}  // namespace ccm
