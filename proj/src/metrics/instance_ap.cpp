#include "fedgrain/metrics/instance_ap.hpp"

#include <algorithm>
#include <map>
#include <utility>

namespace fedgrain::metrics {

double MatchResult::precision() const noexcept {
  const std::size_t den = tp + fp + fn;
  return den == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(den);
}

InstanceOverlaps instance_overlaps(const InstanceMap& pred, const InstanceMap& gt) {
  require_same_grid(pred, gt, "instance_overlaps");
  std::map<std::uint32_t, std::size_t> pred_area, gt_area;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> inter;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::uint32_t p = pred[i], g = gt[i];
    if (p != 0) ++pred_area[p];
    if (g != 0) ++gt_area[g];
    if (p != 0 && g != 0) ++inter[{p, g}];
  }
  InstanceOverlaps out;
  out.pred_count = pred_area.size();
  out.gt_count = gt_area.size();
  out.candidates.reserve(inter.size());
  for (const auto& [key, n] : inter) {
    const std::size_t uni = pred_area[key.first] + gt_area[key.second] - n;
    out.candidates.push_back({key.first, key.second, static_cast<double>(n) / static_cast<double>(uni)});
  }
  std::sort(out.candidates.begin(), out.candidates.end(), [](const MatchedPair& a, const MatchedPair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.gt_id != b.gt_id) return a.gt_id < b.gt_id;
    return a.pred_id < b.pred_id;
  });
  return out;
}

MatchResult match_at_threshold(const InstanceOverlaps& overlaps, double threshold) {
  MatchResult r;
  r.threshold = threshold;
  std::map<std::uint32_t, bool> pred_used, gt_used;
  for (const auto& c : overlaps.candidates) {
    if (!(c.iou > threshold)) break;  // sorted descending
    if (pred_used[c.pred_id] || gt_used[c.gt_id]) continue;
    pred_used[c.pred_id] = gt_used[c.gt_id] = true;
    r.pairs.push_back(c);
  }
  r.tp = r.pairs.size();
  r.fp = overlaps.pred_count - r.tp;
  r.fn = overlaps.gt_count - r.tp;
  return r;
}

ApResult average_precision_detail(const InstanceMap& pred, const InstanceMap& gt) {
  const InstanceOverlaps overlaps = instance_overlaps(pred, gt);
  ApResult out;
  double sum = 0.0;
  for (double t : kApThresholds) {
    out.per_threshold.push_back(match_at_threshold(overlaps, t));
    sum += out.per_threshold.back().precision();
  }
  out.ap = sum / static_cast<double>(kApThresholds.size());
  return out;
}

double average_precision(const InstanceMap& pred, const InstanceMap& gt) {
  return average_precision_detail(pred, gt).ap;
}

}  // namespace fedgrain::metrics
