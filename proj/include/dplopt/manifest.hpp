#pragma once

// Provenance record attached to every output. The embedded form holds only
// deterministic fields, so identical manifests imply identical bytes; wall
// clock times go to a sidecar file next to the output.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dplopt/json_io.hpp"

namespace dplopt {

inline constexpr const char* kToolVersion = "0.3.0";

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

struct ManifestInput {
  std::string path;
  std::string hash;  ///< fnv1a64 of the file contents, hex
};

struct RunManifest {
  std::string command;
  std::vector<ManifestInput> inputs;
  Json config = Json::object();
  std::string version = kToolVersion;
  std::uint64_t seed = 0;

  /// Reads and hashes `path`; throws Error when unreadable.
  void add_input(const std::filesystem::path& path);

  Json to_json() const;
  /// fnv1a64 of the compact to_json() dump.
  std::string digest() const;
  /// to_json() plus start/end timestamps (UTC, ISO 8601).
  Json sidecar(const std::string& started, const std::string& finished) const;
};

std::string utc_timestamp();

}  // namespace dplopt
