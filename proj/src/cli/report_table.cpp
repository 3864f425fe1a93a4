#include "fedgrain/cli/report_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "fedgrain/common/error.hpp"

namespace fedgrain::cli {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int method_rank(const std::string& m) {
  if (m.rfind("separate", 0) == 0) return 0;
  if (m == "central") return 1;
  if (m == "fedavg") return 2;
  if (m == "fedtransfer") return 3;
  return 4;
}

std::string cell_text(const ReportCell& c) {
  std::string s = fmt("%.3f", c.mean);
  if (c.stddev) s += " ± " + fmt("%.3f", *c.stddev);
  if (c.best) s += "*";
  return s;
}

// Display width, counting each UTF-8 sequence once.
std::size_t width(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char ch) { return (ch & 0xC0) != 0x80; }));
}

std::string pad(const std::string& s, std::size_t w, bool left) {
  const std::string fill(w > width(s) ? w - width(s) : 0, ' ');
  return left ? s + fill : fill + s;
}

}  // namespace

bool lower_is_better(const std::string& metric) { return metric == "MVI"; }

ReportTable build_report(const std::vector<nlohmann::json>& summaries) {
  if (summaries.empty()) throw ConfigError("report: no evaluated runs found");
  ReportTable t;
  struct Samples {
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<double>> values;  // per column
  };
  std::map<std::string, Samples> by_method;
  try {
    for (const auto& s : summaries) {
      std::vector<std::string> sets;
      for (const auto& ts : s.at("test_sets")) sets.push_back(ts.at("test_set").get<std::string>());
      if (t.test_sets.empty()) t.test_sets = sets;
      if (sets != t.test_sets) throw ConfigError("report: runs were evaluated on different test sets");
      const std::string method = s.at("method").get<std::string>();
      const auto seed = s.at("seed").get<std::uint64_t>();
      auto& m = by_method[method];
      if (std::find(m.seeds.begin(), m.seeds.end(), seed) != m.seeds.end())
        throw ConfigError("report: method " + method + " has two runs for seed " + std::to_string(seed));
      m.seeds.push_back(seed);
      m.values.resize(sets.size() * t.metrics.size());
      for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t k = 0; k < t.metrics.size(); ++k)
          m.values[i * t.metrics.size() + k].push_back(s.at("test_sets")[i].at(t.metrics[k]).get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: malformed eval summary: ") + e.what(), 0);
  }
  for (auto& [method, samples] : by_method) {
    ReportRow row;
    row.method = method;
    row.seeds = samples.seeds;
    for (const auto& v : samples.values) {
      ReportCell c;
      double sum = 0;
      for (double x : v) sum += x;
      c.mean = sum / static_cast<double>(v.size());
      if (v.size() > 1) {
        double ss = 0;
        for (double x : v) ss += (x - c.mean) * (x - c.mean);
        c.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
      }
      row.cells.push_back(c);
    }
    t.rows.push_back(std::move(row));
  }
  std::stable_sort(t.rows.begin(), t.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return method_rank(a.method) < method_rank(b.method);
  });
  const std::size_t columns = t.test_sets.size() * t.metrics.size();
  for (std::size_t col = 0; col < columns; ++col) {
    const bool low = lower_is_better(t.metrics[col % t.metrics.size()]);
    double best = low ? INFINITY : -INFINITY;
    for (const auto& r : t.rows) best = low ? std::min(best, r.cells[col].mean) : std::max(best, r.cells[col].mean);
    for (auto& r : t.rows) r.cells[col].best = r.cells[col].mean == best;
  }
  return t;
}

std::string report_csv(const ReportTable& t) {
  std::ostringstream os;
  os << "method,seeds,test_set,metric,mean,std,best\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t i = 0; i < t.test_sets.size(); ++i)
      for (std::size_t k = 0; k < t.metrics.size(); ++k) {
        const auto& c = t.cell(r, i, k);
        os << t.rows[r].method << ',' << t.rows[r].seeds.size() << ',' << t.test_sets[i] << ',' << t.metrics[k] << ','
           << fmt("%.17g", c.mean) << ',' << (c.stddev ? fmt("%.17g", *c.stddev) : "") << ',' << (c.best ? 1 : 0)
           << '\n';
      }
  return os.str();
}

std::string report_text(const ReportTable& t) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> head1{"", ""}, head2{"method", "seeds"};
  for (const auto& ts : t.test_sets)
    for (std::size_t k = 0; k < t.metrics.size(); ++k) {
      head1.push_back(k == 0 ? (ts == "global" ? "global" : "test " + ts) : "");
      head2.push_back(t.metrics[k] + (lower_is_better(t.metrics[k]) ? " (lower)" : " (higher)"));
    }
  grid.push_back(head1);
  grid.push_back(head2);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<std::string> line{t.rows[r].method, std::to_string(t.rows[r].seeds.size())};
    for (const auto& c : t.rows[r].cells) line.push_back(cell_text(c));
    grid.push_back(line);
  }
  std::vector<std::size_t> w(grid[0].size(), 0);
  for (const auto& line : grid)
    for (std::size_t c = 0; c < line.size(); ++c) w[c] = std::max(w[c], width(line[c]));
  std::ostringstream os;
  for (std::size_t l = 0; l < grid.size(); ++l) {
    std::string text;
    for (std::size_t c = 0; c < grid[l].size(); ++c) {
      if (c) text += "  ";
      text += pad(grid[l][c], w[c], c == 0 || l < 2);
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    os << text << '\n';
    if (l == 1) {
      std::size_t total = 0;
      for (auto x : w) total += x + 2;
      os << std::string(total - 2, '-') << '\n';
    }
  }
  os << "* best in column; mean ± sample std over seeds\n";
  return os.str();
}

std::string report_dat(const ReportTable& t) {
  std::ostringstream os;
  os << "# index method";
  for (const auto& ts : t.test_sets)
    for (const auto& m : t.metrics) os << ' ' << ts << '_' << m << ' ' << ts << '_' << m << "_std";
  os << '\n';
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    os << r << " \"" << t.rows[r].method << '"';
    for (const auto& c : t.rows[r].cells) os << ' ' << fmt("%.6f", c.mean) << ' ' << fmt("%.6f", c.stddev.value_or(0.0));
    os << '\n';
  }
  return os.str();
}

}  // namespace fedgrain::cli
