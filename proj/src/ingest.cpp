#include "ccm/ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "ccm/csv.hpp"
#include "ccm/errors.hpp"

namespace ccm {

namespace {

std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 + static_cast<unsigned>(d) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097LL + static_cast<std::int64_t>(doe) - 719468LL;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

}  // namespace

Timestamp parse_date(const std::string& text) {
  int y, m, d;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2d", &y, &m, &d) != 3)
    throw ValidationError("bad date: " + text);
  return days_from_civil(y, m, d) * 86400LL;
}

Timestamp parse_rfc3339(const std::string& text) {
  int y, mo, d, h, mi, s;
  int n = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &s, &n) != 6)
    throw ValidationError("bad RFC 3339 timestamp: " + text);
  std::size_t pos = static_cast<std::size_t>(n);
  // skip fractional seconds
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  std::int64_t offset = 0;
  if (pos < text.size()) {
    const char c = text[pos];
    if (c == 'Z' || c == 'z') {
      ++pos;
    } else if (c == '+' || c == '-') {
      int oh, om;
      if (std::sscanf(text.c_str() + pos + 1, "%2d:%2d", &oh, &om) != 2)
        throw ValidationError("bad timezone offset: " + text);
      offset = (oh * 3600LL + om * 60LL) * (c == '+' ? 1 : -1);
      pos += 6;
    }
  } else {
    throw ValidationError("timestamp missing timezone: " + text);
  }
  if (pos != text.size()) throw ValidationError("trailing characters in timestamp: " + text);
  return days_from_civil(y, mo, d) * 86400LL + h * 3600LL + mi * 60LL + s - offset;
}

std::string format_rfc3339(Timestamp t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

std::string format_date(Timestamp t) {
  int y, m, d;
  civil_from_days(t / 86400, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

namespace {

long parse_count_field(const std::string& s, std::size_t line, const char* what,
                       bool* binary, IngestReport* report) {
  if (s == "-") {
    if (binary) *binary = true;
    if (report)
      report->warnings.push_back("line " + std::to_string(line) +
                                 ": binary change marker, counting 0 " + what + " lines");
    return 0;
  }
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size() || v < 0) throw std::invalid_argument("range");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("line " + std::to_string(line) + ": bad " + std::string(what) +
                          " count '" + s + "'");
  }
}

const std::vector<std::string> kLogHeader = {"repo",         "hash",           "author_id",
                                             "author_date",  "committer_id",   "committer_date",
                                             "file_path",    "added",          "removed"};

}  // namespace

std::vector<CommitRecord> parse_change_log(std::istream& in, IngestReport* report) {
  CsvFile csv = read_csv(in);
  if (!csv.rows.empty() && csv.header != kLogHeader)
    throw ValidationError("change log header mismatch; expected " + join_csv(kLogHeader));
  std::vector<CommitRecord> commits;
  // (repo,hash) -> index of its (single, consecutive) commit block
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::size_t line = csv.row_lines[r];
    if (row.size() != kLogHeader.size())
      throw ValidationError("line " + std::to_string(line) + ": expected " +
                            std::to_string(kLogHeader.size()) + " fields, got " +
                            std::to_string(row.size()));
    const std::string key = row[0] + "\x1f" + row[1];
    bool binary = false;
    FileChange fc;
    fc.file_path = row[6];
    fc.added = parse_count_field(row[7], line, "added", &binary, report);
    fc.removed = parse_count_field(row[8], line, "removed", &binary, report);
    fc.binary = binary;

    auto it = seen.find(key);
    if (it != seen.end()) {
      if (it->second != commits.size() - 1 || commits.back().repo != row[0] ||
          commits.back().hash != row[1])
        throw ValidationError("line " + std::to_string(line) + ": duplicate commit " + row[1] +
                              " in repo " + row[0]);
      CommitRecord& c = commits.back();
      if (c.author_id != row[2] || c.committer_id != row[4])
        throw ValidationError("line " + std::to_string(line) +
                              ": inconsistent author/committer within commit " + row[1]);
      c.file_changes.push_back(std::move(fc));
    } else {
      CommitRecord c;
      c.repo = row[0];
      c.hash = row[1];
      c.author_id = row[2];
      try {
        c.author_date = parse_rfc3339(row[3]);
        c.committer_date = parse_rfc3339(row[5]);
      } catch (const ValidationError& e) {
        throw ValidationError("line " + std::to_string(line) + ": " + e.what());
      }
      c.committer_id = row[4];
      c.file_changes.push_back(std::move(fc));
      commits.push_back(std::move(c));
      seen.emplace(key, commits.size() - 1);
    }
  }
  return commits;
}

std::vector<CommitRecord> parse_change_log_text(const std::string& text, IngestReport* report) {
  std::istringstream in(text);
  return parse_change_log(in, report);
}

std::vector<OrgChartSnapshot> parse_org_charts(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("org chart JSON: ") + e.what());
  }
  if (!j.is_array()) throw ValidationError("org chart JSON must be an array of snapshots");
  std::vector<OrgChartSnapshot> charts;
  for (const auto& snap : j) {
    OrgChartSnapshot s;
    s.valid_from = parse_date(snap.at("valid_from").get<std::string>());
    for (const auto& [team, members] : snap.at("teams").items()) {
      for (const auto& person : members) {
        const std::string id = person.get<std::string>();
        auto [it, inserted] = s.membership.emplace(id, team);
        if (!inserted)
          throw ValidationError("org chart " + format_date(s.valid_from) + ": " + id +
                                " appears in both " + it->second + " and " + team);
      }
    }
    charts.push_back(std::move(s));
  }
  for (std::size_t i = 1; i < charts.size(); ++i) {
    if (charts[i].valid_from <= charts[i - 1].valid_from)
      throw ValidationError("org chart snapshots must have strictly increasing valid_from dates");
  }
  return charts;
}

std::vector<FileMetricsSnapshot> parse_metrics_csv(std::istream& in) {
  static const std::vector<std::string> kHeader = {"repo", "hash", "file_path", "complexity",
                                                   "duplicated_blocks"};
  CsvFile csv = read_csv(in);
  if (!csv.rows.empty() && csv.header != kHeader)
    throw ValidationError("metrics header mismatch; expected " + join_csv(kHeader));
  std::vector<FileMetricsSnapshot> snaps;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::size_t line = csv.row_lines[r];
    if (row.size() != kHeader.size())
      throw ValidationError("metrics line " + std::to_string(line) + ": bad field count");
    const std::string key = row[0] + "\x1f" + row[1];
    auto it = index.find(key);
    if (it == index.end()) {
      FileMetricsSnapshot s;
      s.repo = row[0];
      s.hash = row[1];
      snaps.push_back(std::move(s));
      it = index.emplace(key, snaps.size() - 1).first;
    }
    FileMetrics m;
    try {
      m.complexity = std::stol(row[3]);
      m.duplicated_blocks = std::stol(row[4]);
    } catch (const std::exception&) {
      throw ValidationError("metrics line " + std::to_string(line) + ": bad count");
    }
    if (m.complexity < 0 || m.duplicated_blocks < 0)
      throw ValidationError("metrics line " + std::to_string(line) + ": negative count");
    snaps[it->second].per_file[row[2]] = m;
  }
  return snaps;
}

std::vector<FileMetricsSnapshot> parse_metrics_csv_text(const std::string& text) {
  std::istringstream in(text);
  return parse_metrics_csv(in);
}

std::string find_team(const std::string& person_id, Timestamp at_date,
                      const std::vector<OrgChartSnapshot>& charts) {
  const OrgChartSnapshot* best = nullptr;
  for (const auto& c : charts) {
    if (c.valid_from <= at_date) best = &c;
    else break;
  }
  if (!best) return "Unknown";
  auto it = best->membership.find(person_id);
  return it == best->membership.end() ? "Unknown" : it->second;
}

std::vector<FileChangeEvent> derive_events(const std::vector<CommitRecord>& commits,
                                           const std::vector<FileMetricsSnapshot>& metrics,
                                           const std::vector<OrgChartSnapshot>& charts) {
  std::unordered_map<std::string, const FileMetricsSnapshot*> by_key;
  for (const auto& s : metrics) by_key[s.repo + "\x1f" + s.hash] = &s;

  std::vector<std::string> missing;
  for (const auto& c : commits) {
    if (!by_key.count(c.repo + "\x1f" + c.hash)) missing.push_back(c.repo + ":" + c.hash);
  }
  if (!missing.empty()) {
    std::string msg = "missing metrics snapshot for commits:";
    for (const auto& h : missing) msg += " " + h;
    throw ValidationError(msg);
  }

  auto lookup = [](const FileMetricsSnapshot* snap, const std::string& path) -> FileMetrics {
    if (!snap) return {};
    auto it = snap->per_file.find(path);
    return it == snap->per_file.end() ? FileMetrics{} : it->second;
  };

  std::vector<FileChangeEvent> events;
  std::unordered_map<std::string, const FileMetricsSnapshot*> prev_by_repo;
  for (const auto& c : commits) {
    const FileMetricsSnapshot* curr = by_key.at(c.repo + "\x1f" + c.hash);
    const FileMetricsSnapshot* prev = nullptr;
    if (auto it = prev_by_repo.find(c.repo); it != prev_by_repo.end()) prev = it->second;
    const std::string team_a = find_team(c.author_id, c.author_date, charts);
    const std::string team_c = find_team(c.committer_id, c.committer_date, charts);
    for (const auto& fc : c.file_changes) {
      FileChangeEvent e;
      e.repo = c.repo;
      e.hash = c.hash;
      e.file_path = fc.file_path;
      e.team_author = team_a;
      e.team_committer = team_c;
      e.add = fc.added;
      e.rem = fc.removed;
      const FileMetrics before = lookup(prev, fc.file_path);
      const FileMetrics after = lookup(curr, fc.file_path);
      e.comp = after.complexity;
      e.comp_prev = before.complexity;
      e.dup_prev = before.duplicated_blocks;
      const long delta = after.duplicated_blocks - before.duplicated_blocks;
      e.introduced = delta > 0 ? delta : 0;
      e.fixed = delta < 0 ? -delta : 0;
      events.push_back(std::move(e));
    }
    prev_by_repo[c.repo] = curr;
  }
  return events;
}

std::vector<FileChangeEvent> derive_introductions(const std::vector<CommitRecord>& commits,
                                                  const std::vector<FileMetricsSnapshot>& metrics,
                                                  const std::vector<OrgChartSnapshot>& charts) {
  return derive_events(commits, metrics, charts);
}

std::vector<FileChangeEvent> derive_removals(const std::vector<CommitRecord>& commits,
                                             const std::vector<FileMetricsSnapshot>& metrics,
                                             const std::vector<OrgChartSnapshot>& charts) {
  return derive_events(commits, metrics, charts);
}

std::string events_to_csv(const std::vector<FileChangeEvent>& events,
                          const std::string& manifest_comment) {
  std::string out;
  if (!manifest_comment.empty()) out += manifest_comment + "\n";
  out += "repo,hash,file_path,team_author,team_committer,add,rem,comp,dup_prev,introduced,fixed\n";
  for (const auto& e : events) {
    out += join_csv({e.repo, e.hash, e.file_path, e.team_author, e.team_committer,
                     std::to_string(e.add), std::to_string(e.rem), std::to_string(e.comp),
                     std::to_string(e.dup_prev), std::to_string(e.introduced),
                     std::to_string(e.fixed)});
    out += '\n';
  }
  return out;
}

std::vector<FileChangeEvent> events_from_csv(std::istream& in) {
  static const std::vector<std::string> kHeader = {
      "repo", "hash", "file_path", "team_author", "team_committer",
      "add",  "rem",  "comp",      "dup_prev",    "introduced",
      "fixed"};
  CsvFile csv = read_csv(in);
  if (csv.header != kHeader) throw ValidationError("events header mismatch");
  std::vector<FileChangeEvent> events;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    if (row.size() != kHeader.size())
      throw ValidationError("events line " + std::to_string(csv.row_lines[r]) +
                            ": bad field count");
    FileChangeEvent e;
    e.repo = row[0];
    e.hash = row[1];
    e.file_path = row[2];
    e.team_author = row[3];
    e.team_committer = row[4];
    try {
      e.add = std::stol(row[5]);
      e.rem = std::stol(row[6]);
      e.comp = std::stol(row[7]);
      e.dup_prev = std::stol(row[8]);
      e.introduced = std::stol(row[9]);
      e.fixed = std::stol(row[10]);
    } catch (const std::exception&) {
      throw ValidationError("events line " + std::to_string(csv.row_lines[r]) + ": bad count");
    }
    events.push_back(std::move(e));
  }
  return events;
}

}  // namespace ccm
