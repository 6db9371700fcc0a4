#ifndef OLAB_MANIFEST_HPP
#define OLAB_MANIFEST_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace olab {

// Inventory of one command invocation. Digests cover every emitted file, so
// two runs can be compared without rehashing. Timestamps live only here;
// every other artifact is bitwise-deterministic in (config, seed).
struct RunManifest {
  std::string tool_version;
  std::string command;
  std::string config_digest;
  std::string resolved_config;  // full serialized config, defaults included
  std::uint64_t seed = 0;
  std::string started_utc;
  std::string finished_utc;

  struct FileEntry {
    std::string name;  // relative to the manifest's directory
    std::string digest;
    std::uint64_t bytes = 0;
  };
  std::vector<FileEntry> files;

  // Hashes and appends one freshly written output file.
  void add_file(const std::filesystem::path& out_dir, const std::string& name);
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

std::string utc_now_iso8601();

}  // namespace olab

#endif  // OLAB_MANIFEST_HPP
