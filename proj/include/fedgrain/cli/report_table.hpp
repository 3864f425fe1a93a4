#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace fedgrain::cli {

struct ReportCell {
  double mean = 0.0;
  std::optional<double> stddev;  // sample standard deviation, present for two or more seeds
  bool best = false;
};

struct ReportRow {
  std::string method;
  std::vector<std::uint64_t> seeds;
  std::vector<ReportCell> cells;  // test_sets x metrics, test set major
};

struct ReportTable {
  std::vector<std::string> test_sets;  // client test sets, then "global"
  std::vector<std::string> metrics{"MAP", "MVI", "ARI"};
  std::vector<ReportRow> rows;

  const ReportCell& cell(std::size_t row, std::size_t test_set, std::size_t metric) const {
    return rows[row].cells[test_set * metrics.size() + metric];
  }
};

// MVI is the only metric where lower is better.
bool lower_is_better(const std::string& metric);

// Groups eval summaries by method; one sample per seed. All summaries must
// list the same test sets. Methods are ordered separate-*, central, fedavg,
// fedtransfer, then anything else alphabetically.
ReportTable build_report(const std::vector<nlohmann::json>& summaries);

// Long format: method,seeds,test_set,metric,mean,std,best.
std::string report_csv(const ReportTable& t);
// Aligned plain text, "mean ± std" cells, best per column marked with '*'.
std::string report_text(const ReportTable& t);
// Whitespace-separated columns for gnuplot, one row per method:
// index, "method", then mean and std of every (test set, metric) column.
std::string report_dat(const ReportTable& t);

}  // namespace fedgrain::cli
