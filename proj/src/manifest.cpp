#include "ccm/manifest.hpp"

#include "json.hpp"

#include "ccm/csv.hpp"
#include "ccm/math.hpp"

namespace ccm {

void RunManifest::add_input(const std::string& path) {
  digests[path] = fnv1a64_hex(read_text_file(path));
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["tool"] = "clone-commons";
  j["version"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["config"] = config;
  j["inputs"] = digests;
  j["seed"] = seed;
  return j.dump();
}

std::string RunManifest::csv_comment() const { return "# manifest=" + to_json(); }

std::string RunManifest::svg_comment() const { return "<!-- manifest=" + to_json() + " -->"; }

}  // namespace ccm
