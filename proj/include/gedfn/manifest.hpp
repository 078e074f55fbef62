#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace gedfn {

/// Record written next to every CLI output: enough to re-run the command and
/// reproduce its metric files.
struct RunManifest {
  std::string subcommand;
  std::map<std::string, std::string> config;  // effective option values
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> input_hashes;  // path -> FNV-1a hex
  std::vector<std::string> warnings;
  std::vector<std::string> outputs;
  std::string version = GEDFN_VERSION;
  double wall_seconds = 0.0;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);

  /// Writes manifest.json (atomically) into `directory`.
  void write(const std::filesystem::path& directory) const;
  static RunManifest read(const std::filesystem::path& path);

  /// The `config` map as "key=value" lines, loadable with --config.
  std::string config_text() const;
};

}  // namespace gedfn
