#include "fedgrain/cli/experiment.hpp"

#include "fedgrain/common/error.hpp"
#include "fedgrain/common/digest.hpp"
#include "fedgrain/metrics/instance_ap.hpp"

namespace fedgrain::cli {

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

}  // namespace

ExperimentConfig default_experiment() {
  ExperimentConfig c;
  synth::StyleSpec a;
  a.boundary_mean = 0.25;
  a.grain_mean = 0.70;
  a.grain_jitter = 0.05;
  a.noise_sigma = 0.04;
  synth::StyleSpec b;
  b.boundary_mean = 0.75;
  b.grain_mean = 0.30;
  b.grain_jitter = 0.05;
  b.noise_sigma = 0.06;
  b.texture_amplitude = 0.06;
  b.texture_frequency = 0.12;
  c.dataset.clients = {{"A", a, 318}, {"B", b, 318}};
  return c;
}

std::string domain_name(metrics::PartitionDomain d) {
  return d == metrics::PartitionDomain::kGrainsOnly ? "grains-only" : "include-boundary";
}

metrics::PartitionDomain parse_domain(const std::string& s) {
  if (s == "include-boundary") return metrics::PartitionDomain::kIncludeBoundary;
  if (s == "grains-only") return metrics::PartitionDomain::kGrainsOnly;
  throw ConfigError("evaluation.domain: expected 'include-boundary' or 'grains-only', got '" + s + "'");
}

void validate(const ExperimentConfig& c) {
  synth::validate(c.dataset);
  fed::validate(c.federated);
  if (c.repeat < 1) throw ConfigError("repeat must be >= 1");
  if (c.output.empty()) throw ConfigError("output directory must be nonempty");
  const std::size_t cell = std::size_t{1} << c.federated.segmenter.depth;
  if (c.dataset.height % cell || c.dataset.width % cell)
    throw ConfigError("dataset: image size " + std::to_string(c.dataset.height) + "x" + std::to_string(c.dataset.width) +
                      " must be divisible by 2^depth = " + std::to_string(cell));
  const std::size_t style_cell = std::size_t{1} << c.federated.style.generator_depth;
  if (c.federated.mode == fed::TrainingMode::kFedTransfer && (c.dataset.height % style_cell || c.dataset.width % style_cell))
    throw ConfigError("dataset: image size must be divisible by 2^generator_depth = " + std::to_string(style_cell));
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  auto fed = fed::to_json(c.federated);
  nlohmann::ordered_json out;
  out["dataset"] = synth::to_json(c.dataset);
  out["segmenter"] = fed["segmenter"];
  out["style_model"] = fed["style_model"];
  fed.erase("segmenter");
  fed.erase("style_model");
  out["federated"] = fed;
  out["evaluation"] = {{"domain", domain_name(c.evaluation.domain)},
                       {"ap_thresholds", metrics::kApThresholds}};
  out["output"] = c.output.generic_string();
  out["repeat"] = c.repeat;
  return out;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"dataset", "segmenter", "style_model", "federated", "evaluation", "output", "repeat"}, "config");
  ExperimentConfig c = default_experiment();
  if (j.contains("dataset")) {
    // Partial dataset sections overlay the defaults, except that a given
    // client list replaces the default one.
    nlohmann::json d = synth::to_json(c.dataset);
    if (!j["dataset"].is_object()) throw ConfigError("dataset: expected a JSON object");
    for (const auto& [k, v] : j["dataset"].items()) d[k] = v;
    c.dataset = synth::dataset_config_from_json(d);
  }
  nlohmann::json f = j.value("federated", nlohmann::json::object());
  if (!f.is_object()) throw ConfigError("federated: expected a JSON object");
  if (f.contains("segmenter") || f.contains("style_model"))
    throw ConfigError("federated: 'segmenter' and 'style_model' are top-level sections");
  if (j.contains("segmenter")) f["segmenter"] = j["segmenter"];
  if (j.contains("style_model")) f["style_model"] = j["style_model"];
  c.federated = fed::federated_config_from_json(f);
  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    reject_unknown(e, {"domain", "ap_thresholds"}, "evaluation");
    if (e.contains("domain")) {
      if (!e["domain"].is_string()) throw ConfigError("evaluation.domain: expected a string");
      c.evaluation.domain = parse_domain(e["domain"].get<std::string>());
    }
    if (e.contains("ap_thresholds") && e["ap_thresholds"] != nlohmann::json(metrics::kApThresholds))
      throw ConfigError("evaluation.ap_thresholds: only the 0.50:0.05:0.95 sweep is supported");
  }
  try {
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    if (j.contains("repeat")) c.repeat = j["repeat"].get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

std::vector<ExperimentConfig> expand_seeds(const ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                                           std::optional<std::size_t> repeat) {
  const std::size_t n = repeat.value_or(cfg.repeat);
  if (n < 1) throw ConfigError("repeat must be >= 1");
  const std::uint64_t data_base = seed.value_or(cfg.dataset.seed);
  const std::uint64_t train_base = seed.value_or(cfg.federated.seed);
  std::vector<ExperimentConfig> out;
  for (std::size_t k = 0; k < n; ++k) {
    ExperimentConfig c = cfg;
    c.repeat = 1;
    c.dataset.seed = data_base + k;
    c.federated.seed = train_base + k;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace fedgrain::cli
