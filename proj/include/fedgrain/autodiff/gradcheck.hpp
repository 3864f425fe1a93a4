#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fedgrain/autodiff/graph.hpp"

namespace fedgrain::ad {

// Builds the scalar loss for the parameters bound in the given graph.
using LossBuilder = std::function<NodeId(Graph&, const Binding&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  bool passed = true;

  double max_rel_error() const;
  std::string summary() const;
};

struct GradCheckOptions {
  double step = 1e-5;
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor), so
  // components whose true gradient is ~0 are judged in absolute terms.
  double denominator_floor = 1e-4;
  // 0 checks every component; otherwise an evenly strided subset per entry.
  std::size_t max_components_per_entry = 0;
};

// Central finite differences against Graph::backward for every parameter.
GradCheckReport finite_diff_check(const LossBuilder& build, const ParamSet& params, double tolerance,
                                  const GradCheckOptions& options = {});

}  // namespace fedgrain::ad
