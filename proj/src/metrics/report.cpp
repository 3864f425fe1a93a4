#include "fedgrain/metrics/report.hpp"

#include <cstdio>
#include <stdexcept>

#include "fedgrain/metrics/instance_ap.hpp"
#include "json.hpp"

namespace fedgrain::metrics {

ImageScore score_image(std::string id, const InstanceMap& predicted, const InstanceMap& truth,
                       const MetricOptions& options) {
  const ContingencyTable table = contingency_table(truth, predicted, options.domain);
  ImageScore s;
  s.image_id = std::move(id);
  s.ap = average_precision(predicted, truth);
  s.vi = variation_of_information(table);
  s.ari = adjusted_rand_index(table);
  return s;
}

void finalize(MetricsReport& report) {
  report.map = report.mvi = report.mean_ari = 0.0;
  if (report.images.empty()) return;
  for (const auto& s : report.images) {
    report.map += s.ap;
    report.mvi += s.vi;
    report.mean_ari += s.ari;
  }
  const double n = static_cast<double>(report.images.size());
  report.map /= n;
  report.mvi /= n;
  report.mean_ari /= n;
}

MetricsReport evaluate_test_set(std::string test_set, const InstancePredictor& predict,
                                std::span<const LabeledImage> tests, const MetricOptions& options) {
  if (tests.empty()) throw std::invalid_argument("evaluate_test_set: empty test list for " + test_set);
  MetricsReport report;
  report.test_set = std::move(test_set);
  for (const auto& t : tests) report.images.push_back(score_image(t.id, predict(*t.image), *t.truth, options));
  finalize(report);
  return report;
}

MetricsReport global_report(std::span<const MetricsReport> per_set, std::string name) {
  if (per_set.empty()) throw std::invalid_argument("global_report: no test sets");
  MetricsReport g;
  g.test_set = std::move(name);
  for (const auto& r : per_set) {
    g.map += r.map;
    g.mvi += r.mvi;
    g.mean_ari += r.mean_ari;
  }
  const double n = static_cast<double>(per_set.size());
  g.map /= n;
  g.mvi /= n;
  g.mean_ari /= n;
  return g;
}

namespace {
std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string to_csv(const MetricsReport& report) {
  std::string out = "image_id,AP,VI,ARI\n";
  for (const auto& s : report.images)
    out += s.image_id + "," + fmt17(s.ap) + "," + fmt17(s.vi) + "," + fmt17(s.ari) + "\n";
  return out;
}

std::string to_json_summary(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["test_set"] = report.test_set;
  j["MAP"] = report.map;
  j["MVI"] = report.mvi;
  j["ARI"] = report.mean_ari;
  j["image_count"] = report.images.size();
  return j.dump(2) + "\n";
}

}  // namespace fedgrain::metrics
