#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedgrain/imaging/grid.hpp"

namespace fedgrain::metrics {

// Which pixels enter the VI/ARI clusterings. kIncludeBoundary treats id 0 as
// one more cluster; kGrainsOnly drops pixels that are 0 in either partition.
enum class PartitionDomain { kIncludeBoundary, kGrainsOnly };

// Overlap counts n_ij = |X_i & Y_j| with marginals. Rows index the distinct
// ids of X in ascending order, columns those of Y.
struct ContingencyTable {
  std::vector<std::uint32_t> row_ids;
  std::vector<std::uint32_t> col_ids;
  std::vector<std::uint64_t> counts;  // row-major rows x cols
  std::vector<std::uint64_t> row_sums;
  std::vector<std::uint64_t> col_sums;
  std::uint64_t total = 0;

  std::size_t rows() const noexcept { return row_ids.size(); }
  std::size_t cols() const noexcept { return col_ids.size(); }
  std::uint64_t at(std::size_t i, std::size_t j) const { return counts[i * cols() + j]; }
};

ContingencyTable contingency_table(const InstanceMap& x, const InstanceMap& y,
                                   PartitionDomain domain = PartitionDomain::kIncludeBoundary);

struct ConditionalEntropies {
  double x_given_y = 0.0;  // over-segmentation
  double y_given_x = 0.0;  // under-segmentation
  double total() const noexcept { return x_given_y + y_given_x; }
};

// Base-2 conditional entropies from the table.
ConditionalEntropies conditional_entropies(const ContingencyTable& table);

// VI(X, Y) = H(X|Y) + H(Y|X), in bits.
double variation_of_information(const ContingencyTable& table);
double variation_of_information(const InstanceMap& x, const InstanceMap& y,
                                PartitionDomain domain = PartitionDomain::kIncludeBoundary);

// Hubert-Arabie adjusted Rand index from the table. Returns 1 when the
// chance-corrected denominator vanishes; throws for fewer than 2 elements.
double adjusted_rand_index(const ContingencyTable& table);
double adjusted_rand_index(const InstanceMap& x, const InstanceMap& y,
                           PartitionDomain domain = PartitionDomain::kIncludeBoundary);

}  // namespace fedgrain::metrics
