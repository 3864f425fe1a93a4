#include "fedgrain/autodiff/param_set.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <unordered_set>

#include "fedgrain/common/digest.hpp"

namespace fedgrain::ad {

void ParamSet::add(std::string name, Tensor value) {
  for (const auto& e : entries_)
    if (e.name == name) throw ShapeError("paramset: duplicate entry name '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
}

std::size_t ParamSet::total_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::size_t ParamSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  throw ShapeError("paramset: no entry named '" + std::string(name) + "'");
}

const Tensor& ParamSet::at(std::string_view name) const { return entries_[index_of(name)].value; }
Tensor& ParamSet::at(std::string_view name) { return entries_[index_of(name)].value; }

bool ParamSet::compatible_with(const ParamSet& other) const noexcept {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (entries_[i].value.shape() != other.entries_[i].value.shape()) return false;
  }
  return true;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  out.entries_.reserve(entries_.size());
  for (const auto& e : entries_) out.entries_.push_back({e.name, Tensor(e.value.shape(), 0.0)});
  return out;
}

bool ParamSet::all_finite() const noexcept {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const ParamEntry& e) { return e.value.all_finite(); });
}

void require_compatible(const ParamSet& a, const ParamSet& b, std::string_view context) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(context) + ": incompatible paramsets (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + " entries)");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].value.shape() != b[i].value.shape()) {
      throw ShapeError(std::string(context) + ": incompatible entry " + std::to_string(i) + " ('" +
                       a[i].name + "' " + shape_str(a[i].value.shape()) + " vs '" + b[i].name +
                       "' " + shape_str(b[i].value.shape()) + ")");
    }
  }
}

double max_abs_diff(const ParamSet& a, const ParamSet& b) {
  require_compatible(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto x = a[i].value.data();
    auto y = b[i].value.data();
    for (std::size_t k = 0; k < x.size(); ++k) m = std::max(m, std::abs(x[k] - y[k]));
  }
  return m;
}

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  auto bits = std::bit_cast<std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      bits |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  unsigned char get_byte(const char* what) {
    need(1, what);
    return static_cast<unsigned char>(bytes_[pos_++]);
  }

  std::string_view get_bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string("checkpoint: truncated while reading ") + what, pos_);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ParamSet& params) {
  std::string out(kCheckpointMagic);
  out.push_back(static_cast<char>(kCheckpointVersion));
  put_le<std::uint64_t>(out, params.size());
  for (const auto& e : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape()) put_le<std::uint64_t>(out, d);
    for (double v : e.value.data()) put_le<double>(out, v);
  }
  return out;
}

ParamSet deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.get_bytes(4, "magic") != kCheckpointMagic) throw FormatError("checkpoint: bad magic", 0);
  const auto version = r.get_byte("version");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version), 4);
  const auto count = r.get_le<std::uint64_t>("entry count");
  ParamSet out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.get_le<std::uint32_t>("name length");
    std::string name(r.get_bytes(name_len, "name"));
    const auto rank = r.get_le<std::uint32_t>("rank");
    if (rank > 8) throw FormatError("checkpoint: implausible rank " + std::to_string(rank), r.pos() - 4);
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.get_le<std::uint64_t>("dimension");
      if (d == 0 || d > (1ULL << 32)) throw FormatError("checkpoint: bad dimension", r.pos() - 8);
    }
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = r.get_le<double>("values");
    const std::size_t at = r.pos();
    try {
      out.add(std::move(name), Tensor(std::move(shape), std::move(data)));
    } catch (const ShapeError& e) {
      throw FormatError(std::string("checkpoint: ") + e.what(), at);
    }
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes", r.pos());
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
  write_file(path, serialize_checkpoint(params));
}

ParamSet load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace fedgrain::ad
