#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedgrain/imaging/grid.hpp"

namespace fedgrain::metrics {

inline constexpr std::array<double, 10> kApThresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                                         0.75, 0.80, 0.85, 0.90, 0.95};

struct MatchedPair {
  std::uint32_t pred_id = 0;
  std::uint32_t gt_id = 0;
  double iou = 0.0;
};

struct MatchResult {
  double threshold = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<MatchedPair> pairs;

  // TP / (TP + FP + FN); 1 when there is nothing to find and nothing predicted.
  double precision() const noexcept;
};

// Every (pred, gt) instance pair with nonzero overlap and its IoU.
struct InstanceOverlaps {
  std::size_t pred_count = 0;
  std::size_t gt_count = 0;
  std::vector<MatchedPair> candidates;
};

InstanceOverlaps instance_overlaps(const InstanceMap& pred, const InstanceMap& gt);

// Greedy one-to-one matching by descending IoU (ties: lower gt id, then lower
// pred id); a pair is accepted iff IoU > threshold.
MatchResult match_at_threshold(const InstanceOverlaps& overlaps, double threshold);

struct ApResult {
  double ap = 0.0;
  std::vector<MatchResult> per_threshold;
};

ApResult average_precision_detail(const InstanceMap& pred, const InstanceMap& gt);
double average_precision(const InstanceMap& pred, const InstanceMap& gt);

}  // namespace fedgrain::metrics
