#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace fedgrain::cli {

std::string code_version();

struct Artifact {
  std::string path;  // relative to the manifest's directory, '/'-separated
  std::uintmax_t bytes = 0;
  std::string sha256;
};

// Every regular file below dir, sorted by path. The top-level manifest.json
// and the eval/ subtree are skipped: they are written after the run.
std::vector<Artifact> scan_artifacts(const std::filesystem::path& dir, bool include_eval = false);

// Throws IoError naming the first missing or altered file.
void verify_artifacts(const std::filesystem::path& dir, const std::vector<Artifact>& artifacts);

nlohmann::ordered_json to_json(const Artifact& a);
Artifact artifact_from_json(const nlohmann::json& j);

struct RunManifest {
  std::string method;  // "central", "fedavg", "fedtransfer", "separate" or "separate-<client>"
  std::string mode;
  std::uint64_t seed = 0;
  std::string code_version;
  std::string config_sha256;
  std::string dataset_path;  // relative to the run directory
  std::string dataset_sha256;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
  std::vector<std::string> subruns;
  std::vector<Artifact> artifacts;
};

nlohmann::ordered_json to_json(const RunManifest& m);
RunManifest run_manifest_from_json(const nlohmann::json& j);

// Scans dir for artifacts, stores them in m and writes dir/manifest.json.
void write_run_manifest(const std::filesystem::path& dir, RunManifest& m);
// Reads dir/manifest.json; throws IoError when absent, FormatError when malformed.
RunManifest read_run_manifest(const std::filesystem::path& dir);
bool is_run_directory(const std::filesystem::path& dir);

// Pretty JSON with a trailing newline, the form used for every JSON file.
std::string dump(const nlohmann::ordered_json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace fedgrain::cli
