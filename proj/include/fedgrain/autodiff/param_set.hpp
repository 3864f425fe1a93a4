#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fedgrain/autodiff/tensor.hpp"

namespace fedgrain::ad {

struct ParamEntry {
  std::string name;
  Tensor value;

  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

// Ordered, uniquely named collection of parameter tensors. Two sets are
// compatible when names, order and shapes all match.
class ParamSet {
 public:
  void add(std::string name, Tensor value);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t total_count() const noexcept;

  ParamEntry& operator[](std::size_t i) { return entries_[i]; }
  const ParamEntry& operator[](std::size_t i) const { return entries_[i]; }
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);
  std::size_t index_of(std::string_view name) const;

  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  bool compatible_with(const ParamSet& other) const noexcept;
  ParamSet zeros_like() const;
  bool all_finite() const noexcept;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<ParamEntry> entries_;
};

// Throws ShapeError naming `context` and the first mismatch.
void require_compatible(const ParamSet& a, const ParamSet& b, std::string_view context);

double max_abs_diff(const ParamSet& a, const ParamSet& b);

// Checkpoint container:
//   "FGPS" | u8 version(=1) | u64 entry count |
//   per entry: u32 name length | name bytes | u32 rank | u64 dims[rank] | f64 values
// All integers and doubles little-endian.
std::string serialize_checkpoint(const ParamSet& params);
ParamSet deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path);

inline constexpr std::string_view kCheckpointMagic = "FGPS";
inline constexpr unsigned char kCheckpointVersion = 1;

}  // namespace fedgrain::ad
