#include "fairhead/manifest.hpp"

#include <cstdio>
#include <ctime>

#include <json.hpp>

#include "fairhead/io.hpp"
#include "fairhead/version.hpp"

namespace fairhead {

std::uint64_t file_digest(const std::filesystem::path& path) {
  return fnv1a64(read_file(path));
}

RunManifest make_manifest(const std::string& command,
                          const std::map<std::string, std::string>& flags,
                          const std::map<std::string, std::string>& seeds,
                          const std::vector<std::filesystem::path>& inputs) {
  RunManifest m;
  m.command = command;
  m.flags = flags;
  m.seeds = seeds;
  for (const auto& path : inputs) {
    m.input_digests[path.string()] = "fnv1a64:" + to_hex(file_digest(path));
  }
  m.version = std::string(kToolVersion);
  m.timestamp = iso8601_utc_now();
  return m;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& produced) {
  if (std::filesystem::is_directory(produced)) {
    return produced / "manifest.json";
  }
  std::filesystem::path sibling = produced;
  sibling.replace_extension();
  sibling += ".manifest.json";
  return sibling;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& file) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["flags"] = manifest.flags;
  j["seeds"] = manifest.seeds;
  j["inputs"] = manifest.input_digests;
  j["version"] = manifest.version;
  j["timestamp"] = manifest.timestamp;
  atomic_write_file(file, j.dump(2) + "\n");
}

std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", utc.tm_year + 1900,
                utc.tm_mon + 1, utc.tm_mday, utc.tm_hour, utc.tm_min, utc.tm_sec);
  return std::string(buf);
}

}  // namespace fairhead
