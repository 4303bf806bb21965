#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "ccm/cli.hpp"
#include "ccm/csv.hpp"
#include "ccm/report.hpp"

using namespace ccm;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"clone-commons"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ccm_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_toy_inputs(const TempDir& dir) {
  write_text_file(dir.file("log.csv"),
                  "repo,hash,author_id,author_date,committer_id,committer_date,file_path,added,"
                  "removed\n"
                  "r1,h1,alice,2020-01-02T00:00:00Z,bob,2020-01-02T01:00:00Z,src/A.java,30,0\n"
                  "r1,h2,alice,2020-02-02T00:00:00Z,alice,2020-02-02T01:00:00Z,src/A.java,10,5\n"
                  "r1,h3,bob,2020-03-02T00:00:00Z,bob,2020-03-02T01:00:00Z,src/A.java,2,20\n");
  write_text_file(dir.file("org.json"),
                  R"([{"valid_from":"2020-01-01","teams":{"Red":["alice"],"Blue":["bob"]}}])");
  write_text_file(dir.file("metrics.csv"),
                  "repo,hash,file_path,complexity,duplicated_blocks\n"
                  "r1,h1,src/A.java,4,1\n"
                  "r1,h2,src/A.java,9,4\n"
                  "r1,h3,src/A.java,5,2\n");
}

}  // namespace

TEST_CASE("unknown flags exit with the usage status") {
  CHECK(run_cli({"ingest", "--no-such-flag"}) == 1);
  CHECK(run_cli({"definitely-not-a-subcommand"}) == 1);
}

TEST_CASE("fit without data is a validation error") {
  CHECK(run_cli({"fit", "--model", "m0"}) == 1);
}

TEST_CASE("ingest, ocam, and metrics run end to end deterministically") {
  TempDir dir;
  write_toy_inputs(dir);

  REQUIRE(run_cli({"ingest", "--log", dir.file("log.csv"), "--org", dir.file("org.json"),
                   "--metrics", dir.file("metrics.csv"), "--out", dir.file("events.csv")}) == 0);
  const std::string events1 = read_text_file(dir.file("events.csv"));
  CHECK(events1.find("# manifest=") == 0);
  CHECK(events1.find("r1,h2,src/A.java,Red,Red,10,5,9,1,3,0") != std::string::npos);
  CHECK(events1.find("r1,h3,src/A.java,Blue,Blue,2,20,5,4,0,2") != std::string::npos);

  REQUIRE(run_cli({"ingest", "--log", dir.file("log.csv"), "--org", dir.file("org.json"),
                   "--metrics", dir.file("metrics.csv"), "--out", dir.file("events2.csv")}) == 0);
  CHECK(read_text_file(dir.file("events2.csv")) == events1);

  REQUIRE(run_cli({"ocam", "--log", dir.file("log.csv"), "--org", dir.file("org.json"),
                   "--metrics", dir.file("metrics.csv"), "--out", dir.file("ocam.csv")}) == 0);
  // committers: h1 -> bob (Blue), h2 -> alice (Red), h3 -> bob (Blue)
  const std::string ocam_csv = read_text_file(dir.file("ocam.csv"));
  CHECK(ocam_csv.find("r1,Blue,n_commit,2,1") != std::string::npos);
  CHECK(ocam_csv.find("r1,Red,n_commit,1,2") != std::string::npos);

  fs::create_directories(dir.file("tree/src"));
  write_text_file(dir.file("tree/src/A.java"), "class A { void f() { if (x) { g(); } } }\n");
  write_text_file(dir.file("tree/src/B.java"), "class B { int h() { return 1; } }\n");
  REQUIRE(run_cli({"metrics", "--root", dir.file("tree"), "--repo", "r1", "--hash", "h9",
                   "--out", dir.file("m.csv")}) == 0);
  const std::string m1 = read_text_file(dir.file("m.csv"));
  CHECK(m1.find("r1,h9,src/A.java,") != std::string::npos);
  REQUIRE(run_cli({"metrics", "--root", dir.file("tree"), "--repo", "r1", "--hash", "h9",
                   "--out", dir.file("m2.csv")}) == 0);
  CHECK(read_text_file(dir.file("m2.csv")) == m1);
}

TEST_CASE("simulate, fit, diagnose, loo, predict, and report work end to end") {
  TempDir dir;
  REQUIRE(run_cli({"simulate", "--model", "m0", "--teams", "2", "--repos", "2", "--n", "160",
                   "--seed", "5", "--out", dir.file("sim")}) == 0);
  REQUIRE(fs::exists(dir.file("sim/dataset.csv")));
  REQUIRE(fs::exists(dir.file("sim/truth.json")));

  REQUIRE(run_cli({"fit", "--dataset", dir.file("sim"), "--model", "m0", "--chains", "2",
                   "--warmup", "150", "--samples", "150", "--seed", "3", "--out",
                   dir.file("fit")}) == 0);
  REQUIRE(fs::exists(dir.file("fit/draws.csv")));
  REQUIRE(fs::exists(dir.file("fit/summary.json")));

  REQUIRE(run_cli({"diagnose", "--fit", dir.file("fit"), "--stride", "10", "--out",
                   dir.file("diag")}) == 0);
  CHECK(fs::exists(dir.file("diag/rootogram.csv")));
  CHECK(fs::exists(dir.file("diag/diagnostics.json")));

  REQUIRE(run_cli({"loo", "--fit", std::string("m0=") + dir.file("fit"), "--out",
                   dir.file("loo")}) == 0);
  CHECK(fs::exists(dir.file("loo/loo_m0.json")));
  CHECK(fs::exists(dir.file("loo/comparison.csv")));

  REQUIRE(run_cli({"predict", "--fit", dir.file("fit"), "--team", "AVERAGE", "--quantity",
                   "prob-at-least-one", "--out", dir.file("pred")}) == 0);
  CHECK(fs::exists(dir.file("pred/prediction.json")));
  // rerun is byte-identical
  REQUIRE(run_cli({"predict", "--fit", dir.file("fit"), "--team", "AVERAGE", "--quantity",
                   "prob-at-least-one", "--out", dir.file("pred2")}) == 0);
  CHECK(read_text_file(dir.file("pred2/prediction.json")) ==
        read_text_file(dir.file("pred/prediction.json")));

  REQUIRE(run_cli({"report", "--figure", "prob-at-least-one", "--fit", dir.file("fit"),
                   "--add", "370", "--rem", "311", "--comp", "282", "--dup", "36", "--out",
                   dir.file("rep")}) == 0);
  REQUIRE(fs::exists(dir.file("rep/prob-at-least-one.svg")));
  const std::string svg = read_text_file(dir.file("rep/prob-at-least-one.svg"));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("manifest=") != std::string::npos);

  // empty team filter errors rather than producing an empty plot
  CHECK(run_cli({"report", "--figure", "prob-at-least-one", "--fit", dir.file("fit"),
                 "--teams", "Nonesuch", "--out", dir.file("rep2")}) == 1);

  // missing upstream artifact names the path
  CHECK(run_cli({"diagnose", "--fit", dir.file("missing"), "--out", dir.file("d2")}) == 1);
}

TEST_CASE("figure CSV backing data re-renders to identical SVG") {
  RootogramData data;
  for (int c = 0; c <= 6; ++c) {
    RootogramBin b;
    b.count = c;
    b.expected = 30.0 / (c + 1);
    b.expected_lo = b.expected * 0.8;
    b.expected_hi = b.expected * 1.2;
    b.observed = 28.0 / (c + 1);
    b.sqrt_expected = std::sqrt(b.expected);
    b.sqrt_expected_lo = std::sqrt(b.expected_lo);
    b.sqrt_expected_hi = std::sqrt(b.expected_hi);
    b.sqrt_observed = std::sqrt(b.observed);
    b.deviation = b.sqrt_expected - b.sqrt_observed;
    data.bins.push_back(b);
  }
  FigureOutput fig = render_rootogram(data, "t", "");
  RootogramData reloaded = rootogram_from_csv(fig.csv);
  FigureOutput fig2 = render_rootogram(reloaded, "t", "");
  CHECK(fig.svg == fig2.svg);

  std::vector<CurvePoint> pts = {{"a", 0, 0.1, 0.05, 0.2}, {"a", 1, 0.3, 0.2, 0.4},
                                 {"b", 0, 0.2, 0.1, 0.3},  {"b", 1, 0.5, 0.4, 0.6}};
  FigureOutput c1 = render_curves(pts, "t", "x", "y", "");
  FigureOutput c2 = render_curves(curves_from_csv(c1.csv), "t", "x", "y", "");
  CHECK(c1.svg == c2.svg);
}
