#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ccid {

inline constexpr std::string_view kVersion = "0.1.0";

/// Record of one CLI invocation. `argv` holds the fully resolved command line
/// (every default spelled out), so replaying it reproduces the outputs.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;
  std::map<std::string, std::string> config;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, std::uint64_t> seeds;
  std::string version = std::string(kVersion);
  double duration_s = 0.0;

  bool operator==(const RunManifest&) const = default;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(std::string_view text, std::string_view name);

/// Manifest location for an output path: `<output>.manifest.json` next to it.
/// For a directory output the manifest sits beside the directory, so the
/// directory itself only holds the generated files.
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace ccid
