#include "doctest.h"

#include <string>
#include <vector>

#include "ccm/clone_metrics.hpp"
#include "ccm/rng.hpp"

using namespace ccm;

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

// Test-only oracle: direct all-pairs window comparison, no hashing.
int oracle_blocks(const std::vector<NormalizedFile>& files, std::size_t fi, int w) {
  const auto& f = files[fi];
  if (static_cast<int>(f.lines.size()) < w) return 0;
  auto window_equal = [&](const NormalizedFile& a, std::size_t pa, const NormalizedFile& b,
                          std::size_t pb) {
    for (int k = 0; k < w; ++k)
      if (a.lines[pa + k] != b.lines[pb + k]) return false;
    return true;
  };
  const std::size_t n = f.lines.size() - static_cast<std::size_t>(w) + 1;
  int blocks = 0;
  bool in_run = false;
  for (std::size_t p = 0; p < n; ++p) {
    bool dup = false;
    for (std::size_t gi = 0; gi < files.size() && !dup; ++gi) {
      const auto& g = files[gi];
      if (static_cast<int>(g.lines.size()) < w) continue;
      const std::size_t gn = g.lines.size() - static_cast<std::size_t>(w) + 1;
      for (std::size_t q = 0; q < gn; ++q) {
        if (gi == fi && q == p) continue;
        if (window_equal(f, p, g, q)) {
          dup = true;
          break;
        }
      }
    }
    if (dup && !in_run) ++blocks;
    in_run = dup;
  }
  return blocks;
}

std::vector<std::string> random_lines(Rng& rng, int n, int vocab) {
  std::vector<std::string> lines;
  for (int i = 0; i < n; ++i)
    lines.push_back("stmt_" + std::to_string(rng.uniform_int(vocab)) + "(x" +
                    std::to_string(rng.uniform_int(7)) + ");");
  return lines;
}

}  // namespace

TEST_CASE("normalize collapses whitespace and strips comments") {
  auto f = normalize("A.java", "int  x = 1; // init\n");
  REQUIRE(f.lines.size() == 1);
  CHECK(f.lines[0] == "int x = 1;");
  CHECK(f.line_map[0] == 1);

  auto empty = normalize("B.java", "// only\n/* comments\n span */\n");
  CHECK(empty.lines.empty());
}

TEST_CASE("normalize is idempotent") {
  const char* sources[] = {
      "int  x = 1; // init\nString s = \"http://a//b\";\n/* block */ foo();\n",
      "a = b / 2; // divide\nif (x) { y(); }\n\n\n  spaced   out  ;\n",
      "char c = '\\'';\nint z = 3; /* tail",
  };
  for (const char* src : sources) {
    auto once = normalize("f", src);
    auto twice = normalize("f", join_lines(once.lines));
    CHECK(once.lines == twice.lines);
  }
}

TEST_CASE("cyclomatic complexity examples") {
  CHECK(cyclomatic_complexity("") == 0);
  CHECK(cyclomatic_complexity("// nothing here\n") == 0);
  CHECK(cyclomatic_complexity("void f() { if (x > 0) { y(); } }") == 2);
  CHECK(cyclomatic_complexity(
            "int g(int a) {\n"
            "  if (a > 0 && a < 10) { return 1; }\n"
            "  switch (a) {\n"
            "    case 1: return 2;\n"
            "    case 2: return 3;\n"
            "  }\n"
            "  return 0;\n"
            "}") == 5);
  // decision keywords inside strings and comments do not count
  CHECK(cyclomatic_complexity("void f() { s = \"if case while\"; /* if if */ }") == 1);
}

TEST_CASE("complexity is additive over concatenated functions") {
  const std::string f1 = "void a() { if (x) { b(); } }\n";
  const std::string f2 = "int c(int k) { for (int i=0;i<k;i++) { t += i; } return t; }\n";
  CHECK(cyclomatic_complexity(f1 + f2) ==
        cyclomatic_complexity(f1) + cyclomatic_complexity(f2));
}

TEST_CASE("shared 15-line region counts one block per file, 5-line region none") {
  Rng rng(7);
  auto shared15 = random_lines(rng, 15, 1000000);
  auto shared5 = random_lines(rng, 5, 1000000);

  NormalizedFile a, b;
  a.file_path = "a";
  b.file_path = "b";
  auto fill = [&](NormalizedFile& f, const std::vector<std::string>& shared) {
    f.lines = random_lines(rng, 20, 1000000);
    f.lines.insert(f.lines.end(), shared.begin(), shared.end());
    auto tail = random_lines(rng, 20, 1000000);
    f.lines.insert(f.lines.end(), tail.begin(), tail.end());
    f.line_map.assign(f.lines.size(), 0);
  };

  {
    fill(a, shared15);
    fill(b, shared15);
    DuplicateIndex index(10);
    index.add_file(a);
    index.add_file(b);
    CHECK(count_duplicate_blocks(a, index) == 1);
    CHECK(count_duplicate_blocks(b, index) == 1);
    std::vector<NormalizedFile> files = {a, b};
    CHECK(count_duplicate_blocks(a, index) == oracle_blocks(files, 0, 10));
  }
  {
    fill(a, shared5);
    fill(b, shared5);
    DuplicateIndex index(10);
    index.add_file(a);
    index.add_file(b);
    CHECK(count_duplicate_blocks(a, index) == 0);
    CHECK(count_duplicate_blocks(b, index) == 0);
  }
}

TEST_CASE("self-duplication counts one block per occurrence site") {
  Rng rng(11);
  auto block = random_lines(rng, 12, 1000000);
  NormalizedFile f;
  f.file_path = "self";
  f.lines = block;
  auto gap = random_lines(rng, 15, 1000000);
  f.lines.insert(f.lines.end(), gap.begin(), gap.end());
  f.lines.insert(f.lines.end(), block.begin(), block.end());
  f.line_map.assign(f.lines.size(), 0);

  DuplicateIndex index(10);
  index.add_file(f);
  std::vector<NormalizedFile> files = {f};
  const int expected = oracle_blocks(files, 0, 10);
  CHECK(count_duplicate_blocks(f, index) == expected);
  CHECK(expected == 2);
}

TEST_CASE("index counts equal the brute-force oracle on a random corpus") {
  Rng rng(23);
  std::vector<NormalizedFile> files;
  // small vocabulary forces plenty of accidental repeats
  for (int i = 0; i < 18; ++i) {
    NormalizedFile f;
    f.file_path = "f" + std::to_string(i);
    f.lines = random_lines(rng, 40 + static_cast<int>(rng.uniform_int(120)), 6);
    f.line_map.assign(f.lines.size(), 0);
    files.push_back(std::move(f));
  }
  DuplicateIndex index(10);
  for (const auto& f : files) index.add_file(f);
  for (std::size_t i = 0; i < files.size(); ++i)
    CHECK(count_duplicate_blocks(files[i], index) == oracle_blocks(files, i, 10));
}

TEST_CASE("appending fresh lines leaves other files' counts unchanged") {
  Rng rng(31);
  auto shared = random_lines(rng, 14, 1000000);
  std::vector<NormalizedFile> files(3);
  for (int i = 0; i < 3; ++i) {
    files[i].file_path = "f" + std::to_string(i);
    files[i].lines = random_lines(rng, 30, 1000000);
    if (i < 2) files[i].lines.insert(files[i].lines.end(), shared.begin(), shared.end());
    files[i].line_map.assign(files[i].lines.size(), 0);
  }
  DuplicateIndex before(10);
  for (const auto& f : files) before.add_file(f);
  std::vector<int> counts;
  for (const auto& f : files) counts.push_back(count_duplicate_blocks(f, before));

  // never-seen block appended to the last file
  auto fresh = random_lines(rng, 25, 1000000);
  files[2].lines.insert(files[2].lines.end(), fresh.begin(), fresh.end());
  files[2].line_map.assign(files[2].lines.size(), 0);
  DuplicateIndex after(10);
  for (const auto& f : files) after.add_file(f);
  CHECK(count_duplicate_blocks(files[0], after) == counts[0]);
  CHECK(count_duplicate_blocks(files[1], after) == counts[1]);
}

TEST_CASE("files shorter than the window have zero blocks") {
  NormalizedFile f;
  f.file_path = "tiny";
  f.lines = {"a();", "b();", "c();"};
  f.line_map = {1, 2, 3};
  DuplicateIndex index(10);
  index.add_file(f);
  CHECK(count_duplicate_blocks(f, index) == 0);
}
