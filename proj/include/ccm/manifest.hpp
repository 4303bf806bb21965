#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace ccm {

inline constexpr const char* kToolVersion = "0.1.0";

// Provenance record embedded in every output artifact. Contains no wall-clock
// fields, so identical runs produce identical artifacts.
struct RunManifest {
  std::string subcommand;
  std::map<std::string, std::string> config;   // resolved flag values
  std::map<std::string, std::string> digests;  // input path -> fnv1a64 hex
  std::uint64_t seed = 0;

  void add_input(const std::string& path);  // digests file content
  std::string to_json() const;
  std::string csv_comment() const;  // "# manifest=<json>"
  std::string svg_comment() const;  // "<!-- manifest=<json> -->"
};

}  // namespace ccm
