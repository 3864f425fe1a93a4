#include "fedgrain/cli/run_io.hpp"

#include <algorithm>

#include "fedgrain/common/digest.hpp"
#include "fedgrain/common/error.hpp"

#ifndef FEDGRAIN_VERSION
#define FEDGRAIN_VERSION "unknown"
#endif

namespace fedgrain::cli {

namespace fs = std::filesystem;

namespace {
constexpr const char* kRunFormat = "fedgrain-run";
constexpr int kRunVersion = 1;
}  // namespace

std::string code_version() { return FEDGRAIN_VERSION; }

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

nlohmann::json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

std::vector<Artifact> scan_artifacts(const fs::path& dir, bool include_eval) {
  std::vector<Artifact> out;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    const fs::path rel = fs::relative(it->path(), dir);
    if (it->is_directory()) {
      if (!include_eval && rel == "eval") it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file() || rel == "manifest.json") continue;
    const std::string bytes = read_file(it->path());
    out.push_back({rel.generic_string(), bytes.size(), sha256_hex(bytes)});
  }
  if (ec) throw IoError("cannot scan " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end(), [](const Artifact& a, const Artifact& b) { return a.path < b.path; });
  return out;
}

void verify_artifacts(const fs::path& dir, const std::vector<Artifact>& artifacts) {
  for (const auto& a : artifacts) {
    const fs::path p = dir / a.path;
    if (!fs::is_regular_file(p)) throw IoError("missing artifact " + p.string());
    if (sha256_file(p) != a.sha256) throw IoError("digest mismatch for " + p.string());
  }
}

nlohmann::ordered_json to_json(const Artifact& a) {
  return {{"path", a.path}, {"bytes", a.bytes}, {"sha256", a.sha256}};
}

Artifact artifact_from_json(const nlohmann::json& j) {
  return {j.at("path").get<std::string>(), j.at("bytes").get<std::uintmax_t>(), j.at("sha256").get<std::string>()};
}

nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json timings = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.timings) timings[k] = v;
  nlohmann::ordered_json artifacts = nlohmann::ordered_json::array();
  for (const auto& a : m.artifacts) artifacts.push_back(to_json(a));
  return {{"format", kRunFormat},
          {"version", kRunVersion},
          {"method", m.method},
          {"mode", m.mode},
          {"seed", m.seed},
          {"code_version", m.code_version},
          {"config", {{"path", "config.json"}, {"sha256", m.config_sha256}}},
          {"dataset", {{"path", m.dataset_path}, {"sha256", m.dataset_sha256}}},
          {"timings", timings},
          {"results", m.results},
          {"subruns", m.subruns},
          {"artifacts", artifacts}};
}

RunManifest run_manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != kRunFormat) throw FormatError("not a run manifest", 0);
    if (j.at("version") != kRunVersion) throw FormatError("unsupported run manifest version", 0);
    RunManifest m;
    m.method = j.at("method").get<std::string>();
    m.mode = j.at("mode").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.code_version = j.at("code_version").get<std::string>();
    m.config_sha256 = j.at("config").at("sha256").get<std::string>();
    m.dataset_path = j.at("dataset").at("path").get<std::string>();
    m.dataset_sha256 = j.at("dataset").at("sha256").get<std::string>();
    for (const auto& [k, v] : j.at("timings").items()) m.timings.emplace_back(k, v.get<double>());
    m.results = j.at("results");
    m.subruns = j.at("subruns").get<std::vector<std::string>>();
    for (const auto& a : j.at("artifacts")) m.artifacts.push_back(artifact_from_json(a));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed run manifest: ") + e.what(), 0);
  }
}

void write_run_manifest(const fs::path& dir, RunManifest& m) {
  m.artifacts = scan_artifacts(dir);
  write_file(dir / "manifest.json", dump(to_json(m)));
}

RunManifest read_run_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::is_regular_file(p)) throw IoError(dir.string() + " is not a run directory (no manifest.json)");
  return run_manifest_from_json(read_json(p));
}

bool is_run_directory(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::is_regular_file(p)) return false;
  try {
    return read_json(p).value("format", "") == kRunFormat;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace fedgrain::cli
