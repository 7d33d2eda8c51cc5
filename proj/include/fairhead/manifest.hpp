#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fairhead {

// Provenance record written next to every artifact a command produces.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::string> seeds;
  std::map<std::string, std::string> input_digests;  // path -> fnv1a64:<hex>
  std::string version;
  std::string timestamp;  // ISO-8601 UTC
};

std::uint64_t file_digest(const std::filesystem::path& path);

RunManifest make_manifest(const std::string& command,
                          const std::map<std::string, std::string>& flags,
                          const std::map<std::string, std::string>& seeds,
                          const std::vector<std::filesystem::path>& inputs);

// Directory targets get <dir>/manifest.json; file targets get a sibling
// <stem>.manifest.json.
std::filesystem::path manifest_path_for(const std::filesystem::path& produced);

void write_manifest(const RunManifest& manifest, const std::filesystem::path& file);

std::string iso8601_utc_now();

}  // namespace fairhead
