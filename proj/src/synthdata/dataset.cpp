#include "fedgrain/synthdata/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

#include "fedgrain/common/digest.hpp"
#include "fedgrain/common/error.hpp"
#include "fedgrain/common/rng.hpp"
#include "fedgrain/synthdata/pgm.hpp"
#include "fedgrain/synthdata/voronoi.hpp"

namespace fedgrain::synth {

namespace {

constexpr std::uint64_t kStructureStream = 1;
constexpr std::uint64_t kStyleStream = 2;
constexpr const char* kSplitNames[3] = {"train", "validation", "test"};

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::vector<Sample>& split_of(ClientDataset& c, int s) { return s == 0 ? c.train : s == 1 ? c.validation : c.test; }
const std::vector<Sample>& split_of(const ClientDataset& c, int s) {
  return s == 0 ? c.train : s == 1 ? c.validation : c.test;
}

}  // namespace

std::string synthetic_origin(const std::string& source_client) { return "synthetic-from-" + source_client; }

nlohmann::ordered_json to_json(const StyleSpec& s) {
  return {{"boundary_mean", s.boundary_mean},       {"grain_mean", s.grain_mean},
          {"grain_jitter", s.grain_jitter},         {"noise_sigma", s.noise_sigma},
          {"blur_radius", s.blur_radius},           {"texture_amplitude", s.texture_amplitude},
          {"texture_frequency", s.texture_frequency}};
}

StyleSpec style_from_json(const nlohmann::json& j) {
  const std::string where = "style";
  reject_unknown(j,
                 {"boundary_mean", "grain_mean", "grain_jitter", "noise_sigma", "blur_radius", "texture_amplitude",
                  "texture_frequency"},
                 where);
  StyleSpec s;
  read_key(j, "boundary_mean", s.boundary_mean, where);
  read_key(j, "grain_mean", s.grain_mean, where);
  read_key(j, "grain_jitter", s.grain_jitter, where);
  read_key(j, "noise_sigma", s.noise_sigma, where);
  read_key(j, "blur_radius", s.blur_radius, where);
  read_key(j, "texture_amplitude", s.texture_amplitude, where);
  read_key(j, "texture_frequency", s.texture_frequency, where);
  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

nlohmann::ordered_json to_json(const DatasetConfig& c) {
  nlohmann::ordered_json clients = nlohmann::ordered_json::array();
  for (const auto& cl : c.clients) clients.push_back({{"id", cl.id}, {"samples", cl.samples}, {"style", to_json(cl.style)}});
  return {{"height", c.height},
          {"width", c.width},
          {"min_grains", c.min_grains},
          {"max_grains", c.max_grains},
          {"split_ratio", c.split_ratio},
          {"seed", c.seed},
          {"clients", clients}};
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
  const std::string where = "dataset";
  reject_unknown(j, {"height", "width", "min_grains", "max_grains", "split_ratio", "seed", "clients"}, where);
  DatasetConfig c;
  read_key(j, "height", c.height, where);
  read_key(j, "width", c.width, where);
  read_key(j, "min_grains", c.min_grains, where);
  read_key(j, "max_grains", c.max_grains, where);
  read_key(j, "split_ratio", c.split_ratio, where);
  read_key(j, "seed", c.seed, where);
  if (j.contains("clients")) {
    if (!j["clients"].is_array()) throw ConfigError("dataset.clients: expected an array");
    for (const auto& cj : j["clients"]) {
      reject_unknown(cj, {"id", "samples", "style"}, "dataset.clients[]");
      ClientSpec cl;
      read_key(cj, "id", cl.id, "dataset.clients[]");
      read_key(cj, "samples", cl.samples, "dataset.clients[]");
      if (cj.contains("style")) cl.style = style_from_json(cj["style"]);
      c.clients.push_back(std::move(cl));
    }
  }
  validate(c);
  return c;
}

void validate(const DatasetConfig& c) {
  if (c.clients.empty()) throw ConfigError("dataset: at least one client is required");
  if (c.height < 8 || c.width < 8) throw ConfigError("dataset: image dimensions must be >= 8");
  if (c.min_grains < 1 || c.min_grains > c.max_grains) throw ConfigError("dataset: need 1 <= min_grains <= max_grains");
  if (c.max_grains > c.height * c.width) throw ConfigError("dataset: max_grains exceeds pixel count");
  if (std::accumulate(c.split_ratio.begin(), c.split_ratio.end(), std::size_t{0}) == 0)
    throw ConfigError("dataset: split_ratio must have a positive sum");
  std::set<std::string> ids;
  for (const auto& cl : c.clients) {
    if (cl.id.empty() || cl.id.find_first_of("/\\. ") != std::string::npos)
      throw ConfigError("dataset: client id '" + cl.id + "' must be nonempty without '/', '\\\\', '.' or spaces");
    if (!ids.insert(cl.id).second) throw ConfigError("dataset: duplicate client id '" + cl.id + "'");
    try {
      validate(cl.style);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("dataset: client " + cl.id + ": " + e.what());
    }
    split_counts(cl.samples, c.split_ratio);
  }
}

std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const std::size_t> weights) {
  const std::size_t wsum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  if (wsum == 0) throw ConfigError("largest_remainder: weights sum to zero");
  std::vector<std::size_t> out(weights.size());
  std::vector<std::size_t> rem(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const unsigned __int128 q = static_cast<unsigned __int128>(total) * weights[i];
    out[i] = static_cast<std::size_t>(q / wsum);
    rem[i] = static_cast<std::size_t>(q % wsum);
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[order[k]];
  return out;
}

std::array<std::size_t, 3> split_counts(std::size_t total, const std::array<std::size_t, 3>& ratio) {
  const auto v = largest_remainder(total, ratio);
  for (int s = 0; s < 3; ++s)
    if (v[s] == 0)
      throw ConfigError("dataset: " + std::to_string(total) + " samples leave the " + kSplitNames[s] + " split empty");
  return {v[0], v[1], v[2]};
}

Sample make_sample(const DatasetConfig& c, std::size_t client_index, std::size_t sample_index, const StyleSpec& style) {
  Sample s;
  s.structure_seed = derive_seed(c.seed, {kStructureStream, client_index, sample_index});
  s.style_seed = derive_seed(c.seed, {kStyleStream, client_index, sample_index});
  Rng rng(s.structure_seed);
  const std::size_t grains = c.min_grains + static_cast<std::size_t>(rng() % (c.max_grains - c.min_grains + 1));
  const VoronoiTiling tiling = voronoi_labels(rng(), c.height, c.width, grains);
  s.instances = tiling.instances;
  s.labels = tiling.labels;
  s.image = quantize8(render_style(s.instances, style, s.style_seed));
  return s;
}

std::vector<ClientDataset> make_client_datasets(const DatasetConfig& c) {
  validate(c);
  std::vector<ClientDataset> out;
  for (std::size_t ci = 0; ci < c.clients.size(); ++ci) {
    const ClientSpec& spec = c.clients[ci];
    const auto counts = split_counts(spec.samples, c.split_ratio);
    ClientDataset d;
    d.client_id = spec.id;
    d.style = spec.style;
    std::size_t index = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t k = 0; k < counts[s]; ++k, ++index) {
        Sample sample = make_sample(c, ci, index, spec.style);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%05zu", index);
        sample.id = spec.id + "-" + buf;
        split_of(d, s).push_back(std::move(sample));
      }
    out.push_back(std::move(d));
  }
  return out;
}

void write_datasets(const std::filesystem::path& dir, const DatasetConfig& config,
                    const std::vector<ClientDataset>& clients) {
  nlohmann::ordered_json root;
  root["format"] = "fedgrain-dataset";
  root["version"] = 1;
  root["config"] = to_json(config);
  root["clients"] = nlohmann::ordered_json::array();
  for (const auto& c : clients) {
    nlohmann::ordered_json m;
    m["client_id"] = c.client_id;
    m["style"] = to_json(c.style);
    m["generator"] = {{"seed", config.seed},
                      {"height", config.height},
                      {"width", config.width},
                      {"min_grains", config.min_grains},
                      {"max_grains", config.max_grains}};
    for (int s = 0; s < 3; ++s) {
      auto arr = nlohmann::ordered_json::array();
      for (const Sample& sample : split_of(c, s)) {
        const std::string base = std::string(kSplitNames[s]) + "/" + sample.id;
        save_image(dir / c.client_id / (base + ".image.pgm"), sample.image);
        save_image(dir / c.client_id / (base + ".labels.pgm"), sample.labels);
        save_image(dir / c.client_id / (base + ".instances.pgm"), sample.instances);
        arr.push_back({{"id", sample.id},
                       {"image", base + ".image.pgm"},
                       {"labels", base + ".labels.pgm"},
                       {"instances", base + ".instances.pgm"},
                       {"origin", sample.origin},
                       {"structure_seed", sample.structure_seed},
                       {"style_seed", sample.style_seed}});
      }
      m["splits"][kSplitNames[s]] = arr;
    }
    write_file(dir / c.client_id / "manifest.json", m.dump(2) + "\n");
    root["clients"].push_back({{"id", c.client_id}, {"manifest", c.client_id + "/manifest.json"}});
  }
  write_file(dir / "dataset.json", root.dump(2) + "\n");
}

namespace {

nlohmann::json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

}  // namespace

DatasetConfig read_dataset_config(const std::filesystem::path& dir) {
  const auto root = parse_json_file(dir / "dataset.json");
  if (root.value("format", "") != "fedgrain-dataset") throw FormatError((dir / "dataset.json").string() + ": not a dataset index", 0);
  return dataset_config_from_json(root.at("config"));
}

std::vector<ClientDataset> read_datasets(const std::filesystem::path& dir) {
  const auto root = parse_json_file(dir / "dataset.json");
  if (root.value("format", "") != "fedgrain-dataset") throw FormatError((dir / "dataset.json").string() + ": not a dataset index", 0);
  std::vector<ClientDataset> out;
  try {
    for (const auto& entry : root.at("clients")) {
      const std::filesystem::path manifest_path = dir / entry.at("manifest").get<std::string>();
      const auto m = parse_json_file(manifest_path);
      const std::filesystem::path base = manifest_path.parent_path();
      ClientDataset d;
      d.client_id = m.at("client_id").get<std::string>();
      d.style = style_from_json(m.at("style"));
      for (int s = 0; s < 3; ++s)
        for (const auto& sj : m.at("splits").at(kSplitNames[s])) {
          Sample sample;
          sample.id = sj.at("id").get<std::string>();
          sample.image = load_gray_image(base / sj.at("image").get<std::string>());
          sample.labels = load_label_map(base / sj.at("labels").get<std::string>());
          sample.instances = load_instance_map(base / sj.at("instances").get<std::string>());
          sample.origin = sj.at("origin").get<std::string>();
          sample.structure_seed = sj.at("structure_seed").get<std::uint64_t>();
          sample.style_seed = sj.at("style_seed").get<std::uint64_t>();
          if (s != 0 && !sample.is_real())
            throw FormatError(manifest_path.string() + ": synthetic sample " + sample.id + " outside the train split", 0);
          split_of(d, s).push_back(std::move(sample));
        }
      out.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": malformed manifest: " + e.what(), 0);
  }
  return out;
}

}  // namespace fedgrain::synth
