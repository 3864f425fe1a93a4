#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedgrain/imaging/grid.hpp"
#include "fedgrain/metrics/partition.hpp"

namespace fedgrain::metrics {

struct ImageScore {
  std::string image_id;
  double ap = 0.0;
  double vi = 0.0;
  double ari = 0.0;
};

// Per-image scores plus their arithmetic means (MAP, MVI, mean ARI).
struct MetricsReport {
  std::string test_set;
  std::vector<ImageScore> images;
  double map = 0.0;
  double mvi = 0.0;
  double mean_ari = 0.0;
};

struct MetricOptions {
  PartitionDomain domain = PartitionDomain::kIncludeBoundary;
};

struct LabeledImage {
  std::string id;
  const GrayImage* image = nullptr;
  const InstanceMap* truth = nullptr;
};

using InstancePredictor = std::function<InstanceMap(const GrayImage&)>;

ImageScore score_image(std::string id, const InstanceMap& predicted, const InstanceMap& truth,
                       const MetricOptions& options = {});

// Recomputes the aggregates from report.images.
void finalize(MetricsReport& report);

MetricsReport evaluate_test_set(std::string test_set, const InstancePredictor& predict,
                                std::span<const LabeledImage> tests, const MetricOptions& options = {});

// Mean of the per-set aggregates, i.e. "average performance on the global test
// set". The returned report carries no per-image rows.
MetricsReport global_report(std::span<const MetricsReport> per_set, std::string name = "global");

// CSV: header "image_id,AP,VI,ARI", one row per image, %.17g values.
std::string to_csv(const MetricsReport& report);
// JSON summary: test_set, MAP, MVI, ARI, image_count.
std::string to_json_summary(const MetricsReport& report);

}  // namespace fedgrain::metrics
