#pragma once

#include <vector>

#include "fedgrain/autodiff/param_set.hpp"
#include "fedgrain/metrics/report.hpp"
#include "fedgrain/models/segmenter.hpp"
#include "fedgrain/synthdata/dataset.hpp"

namespace fedgrain::fed {

struct Evaluation {
  std::vector<metrics::MetricsReport> clients;  // one per client test split, named by client id
  metrics::MetricsReport global;                // mean of the client aggregates
};

Evaluation evaluate_model(const ad::ParamSet& params, const models::SegmenterConfig& cfg,
                          const std::vector<synth::ClientDataset>& clients, const metrics::MetricOptions& options = {});

}  // namespace fedgrain::fed
