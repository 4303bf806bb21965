#include "ccm/clone_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>

#include "ccm/csv.hpp"

namespace ccm {

namespace {

// Strips // and /* */ comments while respecting string and char literals.
// `blank_strings` additionally blanks out literal contents (for complexity
// scanning, so braces and keywords inside strings do not count).
std::string strip_comments(const std::string& text, bool blank_strings) {
  std::string out;
  out.reserve(text.size());
  enum class State { Code, Line, Block, Str, Chr };
  State st = State::Code;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const char next = i + 1 < text.size() ? text[i + 1] : '\0';
    switch (st) {
      case State::Code:
        if (c == '/' && next == '/') {
          st = State::Line;
          ++i;
        } else if (c == '/' && next == '*') {
          st = State::Block;
          ++i;
        } else if (c == '"') {
          st = State::Str;
          out += c;
        } else if (c == '\'') {
          st = State::Chr;
          out += c;
        } else {
          out += c;
        }
        break;
      case State::Line:
        if (c == '\n') {
          st = State::Code;
          out += c;
        }
        break;
      case State::Block:
        if (c == '*' && next == '/') {
          st = State::Code;
          ++i;
        } else if (c == '\n') {
          out += c;  // keep line structure
        }
        break;
      case State::Str:
        if (c == '\\' && next != '\0') {
          if (!blank_strings) {
            out += c;
            out += next;
          }
          ++i;
        } else if (c == '"') {
          st = State::Code;
          out += c;
        } else if (c == '\n') {
          st = State::Code;  // unterminated literal; recover at newline
          out += c;
        } else if (!blank_strings) {
          out += c;
        }
        break;
      case State::Chr:
        if (c == '\\' && next != '\0') {
          if (!blank_strings) {
            out += c;
            out += next;
          }
          ++i;
        } else if (c == '\'') {
          st = State::Code;
          out += c;
        } else if (c == '\n') {
          st = State::Code;
          out += c;
        } else if (!blank_strings) {
          out += c;
        }
        break;
    }
  }
  return out;
}

std::string collapse_ws(const std::string& line) {
  std::string out;
  bool in_space = true;  // trims leading space
  for (char c : line) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
    } else {
      if (in_space && !out.empty()) out += ' ';
      in_space = false;
      out += c;
    }
  }
  return out;
}

}  // namespace

NormalizedFile normalize(const std::string& file_path, const std::string& source_text) {
  NormalizedFile f;
  f.file_path = file_path;
  const std::string stripped = strip_comments(source_text, false);
  std::string line;
  int line_no = 1;
  auto flush = [&]() {
    std::string norm = collapse_ws(line);
    if (!norm.empty()) {
      f.lines.push_back(std::move(norm));
      f.line_map.push_back(line_no);
    }
    line.clear();
  };
  for (char c : stripped) {
    if (c == '\n') {
      flush();
      ++line_no;
    } else {
      line += c;
    }
  }
  flush();
  return f;
}

std::string DuplicateIndex::window_key(const NormalizedFile& file, std::size_t start) const {
  std::string key;
  for (int k = 0; k < window_length_; ++k) {
    key += file.lines[start + k];
    key += '\n';
  }
  return key;
}

void DuplicateIndex::add_file(const NormalizedFile& file) {
  if (static_cast<int>(file.lines.size()) < window_length_) return;
  const std::size_t n_windows = file.lines.size() - static_cast<std::size_t>(window_length_) + 1;
  for (std::size_t s = 0; s < n_windows; ++s) windows_[window_key(file, s)] += 1;
}

int DuplicateIndex::occurrence_count(const NormalizedFile& file, std::size_t start) const {
  auto it = windows_.find(window_key(file, start));
  return it == windows_.end() ? 0 : it->second;
}

int count_duplicate_blocks(const NormalizedFile& file, const DuplicateIndex& index) {
  const int w = index.window_length();
  if (static_cast<int>(file.lines.size()) < w) return 0;
  const std::size_t n_windows = file.lines.size() - static_cast<std::size_t>(w) + 1;
  int blocks = 0;
  bool in_run = false;
  for (std::size_t s = 0; s < n_windows; ++s) {
    const bool dup = index.occurrence_count(file, s) > 1;
    if (dup && !in_run) ++blocks;
    in_run = dup;
  }
  return blocks;
}

long cyclomatic_complexity(const std::string& source_text) {
  const std::string code = strip_comments(source_text, true);
  long count = 0;

  static const std::vector<std::string> decision_keywords = {"if", "for", "while", "case",
                                                             "catch"};
  static const std::vector<std::string> non_function_keywords = {
      "if", "for", "while", "switch", "catch", "synchronized", "return", "new", "do", "else",
      "try", "throw", "assert"};

  auto is_ident = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
  };

  std::size_t i = 0;
  const std::size_t n = code.size();
  while (i < n) {
    const char c = code[i];
    if (is_ident(c)) {
      std::size_t j = i;
      while (j < n && is_ident(code[j])) ++j;
      const std::string word = code.substr(i, j - i);
      if (std::find(decision_keywords.begin(), decision_keywords.end(), word) !=
          decision_keywords.end())
        ++count;
      // Function-like unit: identifier '(' ... ')' then '{' (allowing a
      // throws-clause in between), excluding control keywords.
      if (std::find(non_function_keywords.begin(), non_function_keywords.end(), word) ==
          non_function_keywords.end()) {
        std::size_t k = j;
        while (k < n && std::isspace(static_cast<unsigned char>(code[k]))) ++k;
        if (k < n && code[k] == '(') {
          int depth = 0;
          while (k < n) {
            if (code[k] == '(') ++depth;
            else if (code[k] == ')' && --depth == 0) break;
            ++k;
          }
          if (k < n) {
            ++k;
            // allow: whitespace, identifiers, commas (throws A, B)
            while (k < n && (std::isspace(static_cast<unsigned char>(code[k])) ||
                             is_ident(code[k]) || code[k] == ',' || code[k] == '.'))
              ++k;
            if (k < n && code[k] == '{') ++count;
          }
        }
      }
      i = j;
      continue;
    }
    if (c == '&' && i + 1 < n && code[i + 1] == '&') {
      ++count;
      i += 2;
      continue;
    }
    if (c == '|' && i + 1 < n && code[i + 1] == '|') {
      ++count;
      i += 2;
      continue;
    }
    if (c == '?') {
      // skip generics wildcards like List<?> or Map<?, ?>
      std::size_t prev = i;
      while (prev > 0 && std::isspace(static_cast<unsigned char>(code[prev - 1]))) --prev;
      std::size_t nxt = i + 1;
      while (nxt < n && std::isspace(static_cast<unsigned char>(code[nxt]))) ++nxt;
      const char pc = prev > 0 ? code[prev - 1] : '\0';
      const char nc = nxt < n ? code[nxt] : '\0';
      const bool wildcard = pc == '<' || pc == ',' || nc == '>' || nc == ',' || nc == ')';
      if (!wildcard) ++count;
      ++i;
      continue;
    }
    ++i;
  }
  return count;
}

std::vector<TreeMetrics> measure_tree(const std::string& root,
                                      const std::vector<std::string>& extensions,
                                      int window_length) {
  namespace fs = std::filesystem;
  std::vector<std::string> paths;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (!extensions.empty() &&
        std::find(extensions.begin(), extensions.end(), ext) == extensions.end())
      continue;
    paths.push_back(fs::relative(entry.path(), root).generic_string());
  }
  std::sort(paths.begin(), paths.end());

  std::vector<NormalizedFile> files;
  files.reserve(paths.size());
  DuplicateIndex index(window_length);
  for (const auto& p : paths) {
    files.push_back(normalize(p, read_text_file((fs::path(root) / p).string())));
    index.add_file(files.back());
  }

  std::vector<TreeMetrics> out;
  out.reserve(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    TreeMetrics m;
    m.file_path = paths[i];
    m.complexity = cyclomatic_complexity(read_text_file((fs::path(root) / paths[i]).string()));
    m.duplicated_blocks = count_duplicate_blocks(files[i], index);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace ccm
