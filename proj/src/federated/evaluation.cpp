#include "fedgrain/federated/evaluation.hpp"

namespace fedgrain::fed {

Evaluation evaluate_model(const ad::ParamSet& params, const models::SegmenterConfig& cfg,
                          const std::vector<synth::ClientDataset>& clients, const metrics::MetricOptions& options) {
  Evaluation out;
  const metrics::InstancePredictor predict = [&](const GrayImage& img) {
    return models::predict_instances(params, cfg, img).instances;
  };
  for (const auto& c : clients) {
    std::vector<metrics::LabeledImage> tests;
    for (const auto& s : c.test) tests.push_back({s.id, &s.image, &s.instances});
    out.clients.push_back(metrics::evaluate_test_set(c.client_id, predict, tests, options));
  }
  out.global = metrics::global_report(out.clients);
  return out;
}

}  // namespace fedgrain::fed
