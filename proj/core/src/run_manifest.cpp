#include "ccid/run_manifest.hpp"

#include <json.hpp>

#include "ccid/error.hpp"
#include "ccid/io_util.hpp"

namespace ccid {

using nlohmann::json;

std::string manifest_to_json(const RunManifest& m) {
  json j;
  j["format"] = "ccid-manifest v1";
  j["subcommand"] = m.subcommand;
  j["argv"] = m.argv;
  j["config"] = m.config;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["seeds"] = m.seeds;
  j["version"] = m.version;
  j["duration_s"] = m.duration_s;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text, std::string_view name) {
  try {
    const auto j = json::parse(text);
    if (j.value("format", "") != "ccid-manifest v1") throw Error(std::string(name) + ": not a ccid run manifest");
    RunManifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.version = j.at("version").get<std::string>();
    m.duration_s = j.at("duration_s").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  auto p = output;
  if (!p.has_filename()) p = p.parent_path();
  return p.string() + ".manifest.json";
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  io::write_file_atomic(path, manifest_to_json(m));
}

RunManifest read_manifest(const std::filesystem::path& path) {
  return manifest_from_json(io::read_file(path), path.string());
}

}  // namespace ccid
