#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedgrain/imaging/grid.hpp"
#include "json.hpp"
#include "fedgrain/synthdata/style.hpp"

namespace fedgrain::synth {

inline constexpr const char* kOriginReal = "real";
std::string synthetic_origin(const std::string& source_client);

struct Sample {
  std::string id;
  GrayImage image;
  LabelMap labels;
  InstanceMap instances;
  std::string origin = kOriginReal;
  std::uint64_t structure_seed = 0;
  std::uint64_t style_seed = 0;

  bool is_real() const { return origin == kOriginReal; }
};

struct ClientSpec {
  std::string id;
  StyleSpec style;
  std::size_t samples = 0;  // total across the three splits
};

struct DatasetConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t min_grains = 30;
  std::size_t max_grains = 60;
  std::array<std::size_t, 3> split_ratio{560, 140, 192};  // train : validation : test
  std::uint64_t seed = 1;
  std::vector<ClientSpec> clients;
};

struct ClientDataset {
  std::string client_id;
  StyleSpec style;
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;

  std::size_t n_train() const { return train.size(); }
};

void validate(const DatasetConfig& config);

// JSON forms. Parsers reject unknown keys with ConfigError; missing keys keep
// their defaults.
nlohmann::ordered_json to_json(const StyleSpec& style);
StyleSpec style_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const DatasetConfig& config);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

// Hamilton apportionment of total over the weights; leftover units go to the
// largest fractional parts, ties to the lower index.
std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const std::size_t> weights);

// Train/validation/test counts for `total` samples; throws ConfigError when a
// split would be empty.
std::array<std::size_t, 3> split_counts(std::size_t total, const std::array<std::size_t, 3>& ratio);

// One sample: Voronoi structure from the shared generator, rendered in the
// given style, quantized to 8 bits.
Sample make_sample(const DatasetConfig& config, std::size_t client_index, std::size_t sample_index,
                   const StyleSpec& style);

std::vector<ClientDataset> make_client_datasets(const DatasetConfig& config);

// On-disk layout: <dir>/dataset.json plus <dir>/<client>/manifest.json and
// <dir>/<client>/<split>/<id>.{image,labels,instances}.pgm.
void write_datasets(const std::filesystem::path& dir, const DatasetConfig& config,
                    const std::vector<ClientDataset>& clients);
std::vector<ClientDataset> read_datasets(const std::filesystem::path& dir);
DatasetConfig read_dataset_config(const std::filesystem::path& dir);

}  // namespace fedgrain::synth
