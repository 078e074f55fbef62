#include "gedfn/manifest.hpp"

#include "gedfn/errors.hpp"
#include "gedfn/io.hpp"

namespace gedfn {

nlohmann::json RunManifest::to_json() const {
  return {{"subcommand", subcommand}, {"config", config},         {"seeds", seeds},
          {"input_hashes", input_hashes}, {"warnings", warnings}, {"outputs", outputs},
          {"version", version},           {"wall_seconds", wall_seconds}, {"extra", extra}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.subcommand = j.at("subcommand").get<std::string>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.input_hashes = j.at("input_hashes").get<std::map<std::string, std::string>>();
    m.warnings = j.value("warnings", std::vector<std::string>{});
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.version = j.value("version", std::string{});
    m.wall_seconds = j.value("wall_seconds", 0.0);
    m.extra = j.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("manifest: ") + e.what());
  }
  return m;
}

void RunManifest::write(const std::filesystem::path& directory) const {
  write_file_atomic(directory / "manifest.json", to_json().dump(2) + "\n");
}

RunManifest RunManifest::read(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestionError("manifest: " + std::string(e.what()));
  }
}

std::string RunManifest::config_text() const {
  std::string out;
  for (const auto& [k, v] : config) out += k + "=" + v + "\n";
  return out;
}

}  // namespace gedfn
