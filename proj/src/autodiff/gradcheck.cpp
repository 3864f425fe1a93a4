#include "fedgrain/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fedgrain::ad {

namespace {

double evaluate(const LossBuilder& build, const ParamSet& params) {
  Graph g;
  const Binding b = g.bind(params);
  return g.value(build(g, b)).item();
}

}  // namespace

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " tol=" << tolerance << " max_rel=" << max_rel_error();
  for (const auto& e : entries) {
    if (e.max_rel_error > tolerance) {
      os << "\n  " << e.name << "[" << e.worst_index << "] rel=" << e.max_rel_error
         << " analytic=" << e.analytic << " numeric=" << e.numeric;
    }
  }
  return os.str();
}

GradCheckReport finite_diff_check(const LossBuilder& build, const ParamSet& params, double tolerance,
                                  const GradCheckOptions& options) {
  ParamSet analytic;
  {
    Graph g;
    const Binding b = g.bind(params);
    analytic = g.backward(build(g, b), b);
  }
  GradCheckReport report;
  report.tolerance = tolerance;
  ParamSet probe = params;
  for (std::size_t e = 0; e < params.size(); ++e) {
    GradCheckEntry entry;
    entry.name = params[e].name;
    const std::size_t count = params[e].value.size();
    std::size_t stride = 1;
    if (options.max_components_per_entry > 0 && count > options.max_components_per_entry)
      stride = (count + options.max_components_per_entry - 1) / options.max_components_per_entry;
    for (std::size_t k = 0; k < count; k += stride) {
      const double original = params[e].value[k];
      probe[e].value[k] = original + options.step;
      const double up = evaluate(build, probe);
      probe[e].value[k] = original - options.step;
      const double down = evaluate(build, probe);
      probe[e].value[k] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[e].value[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel >= entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = k;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    if (entry.max_rel_error > tolerance) report.passed = false;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace fedgrain::ad
