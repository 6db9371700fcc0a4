#include "olab/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "olab/sha256.hpp"

namespace olab {

void RunManifest::add_file(const std::filesystem::path& out_dir, const std::string& name) {
  const auto path = out_dir / name;
  FileEntry e;
  e.name = name;
  e.digest = sha256_file(path);
  e.bytes = static_cast<std::uint64_t>(std::filesystem::file_size(path));
  files.push_back(std::move(e));
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["tool_version"] = m.tool_version;
  j["command"] = m.command;
  j["config_digest"] = m.config_digest;
  j["seed"] = m.seed;
  j["started_utc"] = m.started_utc;
  j["finished_utc"] = m.finished_utc;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& f : m.files) {
    nlohmann::ordered_json fj;
    fj["name"] = f.name;
    fj["sha256"] = f.digest;
    fj["bytes"] = f.bytes;
    files.push_back(std::move(fj));
  }
  j["files"] = std::move(files);
  j["resolved_config"] = nlohmann::ordered_json::parse(m.resolved_config);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read manifest: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto j = nlohmann::ordered_json::parse(buf.str());

  RunManifest m;
  m.tool_version = j.at("tool_version").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.config_digest = j.at("config_digest").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.started_utc = j.at("started_utc").get<std::string>();
  m.finished_utc = j.at("finished_utc").get<std::string>();
  for (const auto& fj : j.at("files")) {
    RunManifest::FileEntry e;
    e.name = fj.at("name").get<std::string>();
    e.digest = fj.at("sha256").get<std::string>();
    e.bytes = fj.at("bytes").get<std::uint64_t>();
    m.files.push_back(std::move(e));
  }
  m.resolved_config = j.at("resolved_config").dump(2) + "\n";
  return m;
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace olab
