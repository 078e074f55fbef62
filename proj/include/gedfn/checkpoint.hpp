#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "gedfn/network.hpp"

namespace gedfn {

/// Everything needed to resume or score a trained model.
struct Checkpoint {
  NetworkSpec spec;
  ModelParams params;
  AdamState optimizer;
  std::uint64_t seed = 0;
  /// Free-form run metadata (feature names, test sample ids, config, ...).
  nlohmann::json metadata = nlohmann::json::object();
};

/// File layout: the 8-byte magic "GEDFNCK1", a little-endian u64 header
/// length, a JSON header describing the architecture and array shapes, then
/// the mask structure and every parameter / optimizer array as raw
/// little-endian float64 in header order. Written atomically.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws IngestionError on a malformed file or a mask fingerprint mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gedfn
