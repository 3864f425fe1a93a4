#include "fedgrain/metrics/partition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedgrain::metrics {

namespace {

std::vector<std::uint32_t> distinct_ids(const InstanceMap& m, const std::vector<bool>& keep) {
  std::vector<std::uint32_t> ids;
  ids.reserve(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    if (keep[i]) ids.push_back(m[i]);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::size_t index_of(const std::vector<std::uint32_t>& ids, std::uint32_t id) {
  return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
}

using i128 = __int128;

i128 choose2(std::uint64_t k) { return static_cast<i128>(k) * static_cast<i128>(k - (k > 0)) / 2; }

// Neumaier-compensated sum, for tables too large for exact 128-bit arithmetic.
struct CompensatedSum {
  long double sum = 0, c = 0;
  void add(long double v) {
    const long double t = sum + v;
    c += std::fabs(sum) >= std::fabs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  long double value() const { return sum + c; }
};

}  // namespace

ContingencyTable contingency_table(const InstanceMap& x, const InstanceMap& y, PartitionDomain domain) {
  require_same_grid(x, y, "contingency_table");
  std::vector<bool> keep(x.size(), true);
  if (domain == PartitionDomain::kGrainsOnly)
    for (std::size_t i = 0; i < x.size(); ++i) keep[i] = x[i] != 0 && y[i] != 0;
  ContingencyTable t;
  t.row_ids = distinct_ids(x, keep);
  t.col_ids = distinct_ids(y, keep);
  t.counts.assign(t.rows() * t.cols(), 0);
  t.row_sums.assign(t.rows(), 0);
  t.col_sums.assign(t.cols(), 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!keep[i]) continue;
    const std::size_t r = index_of(t.row_ids, x[i]);
    const std::size_t c = index_of(t.col_ids, y[i]);
    ++t.counts[r * t.cols() + c];
    ++t.row_sums[r];
    ++t.col_sums[c];
    ++t.total;
  }
  return t;
}

ConditionalEntropies conditional_entropies(const ContingencyTable& t) {
  ConditionalEntropies h;
  if (t.total == 0) return h;
  const double n = static_cast<double>(t.total);
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const std::uint64_t nij = t.at(i, j);
      if (nij == 0) continue;
      const double p = static_cast<double>(nij) / n;
      h.x_given_y -= p * std::log2(static_cast<double>(nij) / static_cast<double>(t.col_sums[j]));
      h.y_given_x -= p * std::log2(static_cast<double>(nij) / static_cast<double>(t.row_sums[i]));
    }
  // -0.0 from perfect agreement
  h.x_given_y = std::max(0.0, h.x_given_y);
  h.y_given_x = std::max(0.0, h.y_given_x);
  return h;
}

double variation_of_information(const ContingencyTable& table) { return conditional_entropies(table).total(); }

double variation_of_information(const InstanceMap& x, const InstanceMap& y, PartitionDomain domain) {
  return variation_of_information(contingency_table(x, y, domain));
}

double adjusted_rand_index(const ContingencyTable& t) {
  if (t.total < 2) throw std::invalid_argument("adjusted_rand_index: need at least 2 elements, got " +
                                               std::to_string(t.total));
  if (t.total <= (1ULL << 31)) {
    i128 index = 0, sum_a = 0, sum_b = 0;
    for (std::uint64_t v : t.counts) index += choose2(v);
    for (std::uint64_t v : t.row_sums) sum_a += choose2(v);
    for (std::uint64_t v : t.col_sums) sum_b += choose2(v);
    const i128 pairs = choose2(t.total);
    // Eq. multiplied through by 2 * C(n, 2) to stay in integers.
    const i128 num = 2 * (index * pairs - sum_a * sum_b);
    const i128 den = (sum_a + sum_b) * pairs - 2 * sum_a * sum_b;
    if (den == 0) return 1.0;
    return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
  }
  CompensatedSum index, sum_a, sum_b;
  auto c2 = [](std::uint64_t k) { return static_cast<long double>(k) * (static_cast<long double>(k) - 1) / 2; };
  for (std::uint64_t v : t.counts) index.add(c2(v));
  for (std::uint64_t v : t.row_sums) sum_a.add(c2(v));
  for (std::uint64_t v : t.col_sums) sum_b.add(c2(v));
  const long double expected = sum_a.value() * sum_b.value() / c2(t.total);
  const long double max_index = 0.5L * (sum_a.value() + sum_b.value());
  const long double den = max_index - expected;
  if (den == 0) return 1.0;
  return static_cast<double>((index.value() - expected) / den);
}

double adjusted_rand_index(const InstanceMap& x, const InstanceMap& y, PartitionDomain domain) {
  return adjusted_rand_index(contingency_table(x, y, domain));
}

}  // namespace fedgrain::metrics
