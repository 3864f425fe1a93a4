#pragma once

// Independent reference implementations used only by tests. None of these
// share code paths with the library routines they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "fedgrain/common/rng.hpp"
#include "fedgrain/imaging/grid.hpp"

namespace fedgrain::oracle {

// Recursive 4-connected flood fill in raster order.
inline InstanceMap flood_fill_components(const LabelMap& labels) {
  InstanceMap out(labels.height(), labels.width(), 0);
  const int h = static_cast<int>(labels.height()), w = static_cast<int>(labels.width());
  std::function<void(int, int, std::uint32_t)> fill = [&](int y, int x, std::uint32_t id) {
    if (y < 0 || y >= h || x < 0 || x >= w) return;
    if (labels.at(y, x) == kBoundary || out.at(y, x) != 0) return;
    out.at(y, x) = id;
    fill(y - 1, x, id);
    fill(y + 1, x, id);
    fill(y, x - 1, id);
    fill(y, x + 1, id);
  };
  std::uint32_t next = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (labels.at(y, x) != kBoundary && out.at(y, x) == 0) fill(y, x, ++next);
  return out;
}

// ARI by explicit enumeration of all element pairs.
inline double pair_counting_ari(const std::vector<std::uint32_t>& x, const std::vector<std::uint32_t>& y) {
  double both_same = 0, x_only = 0, y_only = 0, total = 0;
  for (std::size_t p = 0; p < x.size(); ++p)
    for (std::size_t q = p + 1; q < x.size(); ++q) {
      const bool sx = x[p] == x[q], sy = y[p] == y[q];
      both_same += sx && sy;
      x_only += sx && !sy;
      y_only += !sx && sy;
      total += 1;
    }
  const double sum_a = both_same + x_only, sum_b = both_same + y_only;
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (both_same - expected) / (max_index - expected);
}

// VI in bits straight from joint/marginal frequencies, no contingency table.
inline double direct_vi(const std::vector<std::uint32_t>& x, const std::vector<std::uint32_t>& y) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> joint;
  std::map<std::uint32_t, double> px, py;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    joint[{x[i], y[i]}] += 1 / n;
    px[x[i]] += 1 / n;
    py[y[i]] += 1 / n;
  }
  double hxy = 0, hx = 0, hy = 0;
  for (auto& [k, p] : joint) hxy -= p * std::log2(p);
  for (auto& [k, p] : px) hx -= p * std::log2(p);
  for (auto& [k, p] : py) hy -= p * std::log2(p);
  return 2 * hxy - hx - hy;
}

// Maximum number of one-to-one (pred, gt) matches with IoU > t, by exhaustive
// search over all assignments of gt objects to distinct preds (or none).
inline std::size_t exhaustive_max_matches(const InstanceMap& pred, const InstanceMap& gt, double t) {
  std::vector<std::uint32_t> pids, gids;
  {
    std::set<std::uint32_t> ps, gs;
    for (auto v : pred.pixels())
      if (v) ps.insert(v);
    for (auto v : gt.pixels())
      if (v) gs.insert(v);
    pids.assign(ps.begin(), ps.end());
    gids.assign(gs.begin(), gs.end());
  }
  auto iou_of = [&](std::uint32_t p, std::uint32_t g) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool a = pred[i] == p, b = gt[i] == g;
      inter += a && b;
      uni += a || b;
    }
    return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
  };
  std::vector<std::vector<bool>> hit(gids.size(), std::vector<bool>(pids.size()));
  for (std::size_t g = 0; g < gids.size(); ++g)
    for (std::size_t p = 0; p < pids.size(); ++p) hit[g][p] = iou_of(pids[p], gids[g]) > t;
  std::vector<bool> used(pids.size(), false);
  std::function<std::size_t(std::size_t)> best = [&](std::size_t g) -> std::size_t {
    if (g == gids.size()) return 0;
    std::size_t b = best(g + 1);
    for (std::size_t p = 0; p < pids.size(); ++p) {
      if (used[p] || !hit[g][p]) continue;
      used[p] = true;
      b = std::max(b, 1 + best(g + 1));
      used[p] = false;
    }
    return b;
  };
  return best(0);
}

// Random partition of n elements into at most k clusters (ids 1..k).
inline std::vector<std::uint32_t> random_partition(std::size_t n, std::uint32_t k, Rng& rng) {
  std::vector<std::uint32_t> v(n);
  for (auto& x : v) x = 1 + static_cast<std::uint32_t>(rng() % k);
  return v;
}

inline InstanceMap as_row(const std::vector<std::uint32_t>& ids) { return InstanceMap(1, ids.size(), ids); }

// Blocky instance map: up to `objects` random rectangles painted over a zero background.
inline InstanceMap random_rect_instances(std::size_t h, std::size_t w, std::uint32_t objects, Rng& rng) {
  InstanceMap m(h, w, 0);
  for (std::uint32_t id = 1; id <= objects; ++id) {
    const std::size_t rh = 1 + rng() % (h / 2), rw = 1 + rng() % (w / 2);
    const std::size_t y0 = rng() % (h - rh + 1), x0 = rng() % (w - rw + 1);
    for (std::size_t y = y0; y < y0 + rh; ++y)
      for (std::size_t x = x0; x < x0 + rw; ++x) m.at(y, x) = id;
  }
  return m;
}

// Copy of m with a fraction of pixels reassigned to random ids in 0..k and
// ids permuted.
inline InstanceMap perturb_instances(const InstanceMap& m, double flip, std::uint32_t k, Rng& rng) {
  InstanceMap out = m;
  for (auto& v : out.pixels())
    if (uniform01(rng) < flip) v = static_cast<std::uint32_t>(rng() % (k + 1));
  std::vector<std::uint32_t> perm(k + 1);
  for (std::uint32_t i = 0; i <= k; ++i) perm[i] = i;
  std::shuffle(perm.begin() + 1, perm.end(), rng);
  for (auto& v : out.pixels()) v = v <= k ? perm[v] : v;
  return out;
}

}  // namespace fedgrain::oracle
