#include "fedgrain/metrics/components.hpp"

#include <algorithm>
#include <vector>

namespace fedgrain::metrics {

InstanceMap connected_components(const LabelMap& labels) {
  const std::size_t h = labels.height(), w = labels.width();
  InstanceMap out(h, w, 0);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (labels[start] == kBoundary || out[start] != 0) continue;
    out[start] = ++next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t y = i / w, x = i % w;
      auto visit = [&](std::size_t j) {
        if (labels[j] != kBoundary && out[j] == 0) {
          out[j] = next;
          stack.push_back(j);
        }
      };
      if (y > 0) visit(i - w);
      if (y + 1 < h) visit(i + w);
      if (x > 0) visit(i - 1);
      if (x + 1 < w) visit(i + 1);
    }
  }
  return out;
}

std::size_t count_instances(const InstanceMap& instances) {
  std::vector<std::uint32_t> ids(instances.pixels().begin(), instances.pixels().end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return static_cast<std::size_t>(std::count_if(ids.begin(), ids.end(), [](std::uint32_t v) { return v != 0; }));
}

double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw ShapeError("iou: pixel sets over different grids");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool in_a = a[i] != 0, in_b = b[i] != 0;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace fedgrain::metrics
