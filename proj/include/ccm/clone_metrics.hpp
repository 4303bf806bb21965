#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace ccm {

struct NormalizedFile {
  std::string file_path;
  std::vector<std::string> lines;  // whitespace-collapsed, comment-stripped
  std::vector<int> line_map;       // normalized index -> original 1-based line
};

NormalizedFile normalize(const std::string& file_path, const std::string& source_text);

// Window index over a full project snapshot. A window is `window_length`
// consecutive normalized lines; a duplicated block is a maximal run of
// consecutive window starts whose window also occurs at some other location
// (same or different file).
class DuplicateIndex {
 public:
  explicit DuplicateIndex(int window_length = 10) : window_length_(window_length) {}

  void add_file(const NormalizedFile& file);
  int window_length() const { return window_length_; }

  // Occurrences of the window starting at `start` in `file`.
  int occurrence_count(const NormalizedFile& file, std::size_t start) const;

 private:
  friend int count_duplicate_blocks(const NormalizedFile&, const DuplicateIndex&);
  std::string window_key(const NormalizedFile& file, std::size_t start) const;

  int window_length_;
  std::unordered_map<std::string, int> windows_;
};

int count_duplicate_blocks(const NormalizedFile& file, const DuplicateIndex& index);

long cyclomatic_complexity(const std::string& source_text);

struct TreeMetrics {
  std::string file_path;
  long complexity = 0;
  long duplicated_blocks = 0;
};

// Walks a source tree, normalizes every matching file, and measures the
// snapshot. Paths are reported relative to root, sorted.
std::vector<TreeMetrics> measure_tree(const std::string& root,
                                      const std::vector<std::string>& extensions,
                                      int window_length = 10);

}  // namespace ccm
