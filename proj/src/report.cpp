// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "sparseseq/errors.hpp"
#include "sparseseq/harness/grid.hpp"
#include "sparseseq/metrics/metrics.hpp"

namespace sparseseq::harness {

ReportFormat parse_report_format(const std::string& name) {
  if (name == "table") return ReportFormat::table;
  if (name == "csv") return ReportFormat::csv;
  if (name == "plotdata") return ReportFormat::plotdata;
  throw ConfigError("unknown report format '" + name + "' (table|csv|plotdata)");
}

namespace {

template <typename T>
void add_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

/// Column label of a row; mode and shift are appended when a model appears
/// with more than one of them.
std::map<std::string, std::string> labels_for(const ResultsTable& table) {
  std::map<std::string, std::set<std::string>> variants;
  for (const auto& r : table) variants[r.model].insert(r.mode + "/" + std::to_string(r.shift));
  std::map<std::string, std::string> out;
  for (const auto& r : table) {
    std::string label = r.model;
    if (variants[r.model].size() > 1) label += " " + r.mode + " n=" + std::to_string(r.shift);
    out[r.key()] = label;
  }
  return out;
}

int model_rank(const std::string& m) {
  static const std::vector<std::string> order{"GRU", "GRU-D", "GRU-APC", "GRU-D-APC"};
  const auto it = std::find(order.begin(), order.end(), m);
  return static_cast<int>(it - order.begin());
}

int mode_rank(const std::string& m) { return m == "scratch" ? 0 : m == "frozen" ? 1 : 2; }

double minority_share(const std::string& ratio) {
  try {
    const auto [a, b] = parse_ratio(ratio);
    return a / (a + b);
  } catch (const ConfigError&) {
    return 0.0;
  }
}

/// Table order: balanced cells first, then missing rate; known models first.
ResultsTable ordered(ResultsTable t) {
  std::stable_sort(t.begin(), t.end(), [](const ResultRow& x, const ResultRow& y) {
    const auto kx = std::make_tuple(-minority_share(x.ratio), x.missing, model_rank(x.model), x.model,
                                    mode_rank(x.mode), x.shift, x.run);
    const auto ky = std::make_tuple(-minority_share(y.ratio), y.missing, model_rank(y.model), y.model,
                                    mode_rank(y.mode), y.shift, y.run);
    return kx < ky;
  });
  return t;
}

struct Group {
  std::vector<double> auroc, auprc, f1w, f1m;
  std::size_t failed = 0;
};

std::size_t columns_of(const std::string& s) {
  std::size_t cols = 0;
  for (unsigned char c : s) cols += (c & 0xC0) != 0x80;
  return cols;
}

std::string pad(const std::string& s, std::size_t w) {
  const std::size_t cols = columns_of(s);
  return s + std::string(w > cols ? w - cols : 0, ' ');
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string report(const ResultsTable& input, ReportFormat format) {
  if (input.empty()) throw ConfigError("report: no results");
  const ResultsTable table = format == ReportFormat::csv ? input : ordered(input);
  std::ostringstream out;
  if (format == ReportFormat::csv) {
    write_csv(out, table);
    return out.str();
  }

  const auto labels = labels_for(table);
  std::vector<std::string> cells;
  std::vector<std::string> columns;
  std::map<std::string, std::pair<std::string, double>> cell_info;
  std::map<std::pair<std::string, std::string>, Group> groups;
  for (const auto& r : table) {
    const std::string& label = labels.at(r.key());
    add_unique(cells, r.cell);
    add_unique(columns, label);
    cell_info[r.cell] = {r.ratio, r.missing};
    Group& g = groups[{r.cell, label}];
    if (!r.ok()) {
      ++g.failed;
      continue;
    }
    g.auroc.push_back(r.auroc);
    g.auprc.push_back(r.auprc);
    g.f1w.push_back(r.f1_weighted);
    g.f1m.push_back(r.f1_minority);
  }

  if (format == ReportFormat::plotdata) {
    out << "ratio,missing,model,metric,n,median,min,max,mean,std\n";
    for (const auto& cell : cells) {
      for (const auto& col : columns) {
        auto it = groups.find({cell, col});
        if (it == groups.end()) continue;
        const Group& g = it->second;
        const std::pair<const char*, const std::vector<double>*> series[] = {
            {"auprc", &g.auprc}, {"auroc", &g.auroc}, {"f1_weighted", &g.f1w},
            {"f1_minority", &g.f1m}};
        for (const auto& [name, values] : series) {
          if (values->empty()) continue;
          const auto s = metrics::summarize(*values);
          out << cell_info[cell].first << ',' << fmt(cell_info[cell].second) << ',' << col << ','
              << name << ',' << s.n << ',' << fmt(s.median) << ',' << fmt(s.min) << ','
              << fmt(s.max) << ',' << fmt(s.mean) << ',' << fmt(s.std) << '\n';
        }
      }
    }
    return out.str();
  }

  std::size_t failed = 0;
  for (const auto& [k, g] : groups) failed += g.failed;
  const std::pair<const char*, std::vector<double> Group::*> blocks[] = {
      {"AUPRC", &Group::auprc}, {"AUROC", &Group::auroc}};
  for (const auto& [title, member] : blocks) {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> head{"ratio", "missing"};
    head.insert(head.end(), columns.begin(), columns.end());
    grid.push_back(head);
    for (const auto& cell : cells) {
      char miss[32];
      std::snprintf(miss, sizeof miss, "%g%%", 100.0 * cell_info[cell].second);
      std::vector<std::string> line{cell_info[cell].first, miss};
      for (const auto& col : columns) {
        auto it = groups.find({cell, col});
        if (it == groups.end() || (it->second.*member).empty()) {
          line.push_back("-");
          continue;
        }
        line.push_back(metrics::format_mean_std(metrics::summarize(it->second.*member)));
      }
      grid.push_back(line);
    }
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& line : grid) {
      for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], columns_of(line[c]));
    }
    out << title << " (mean ± std over runs)\n";
    for (const auto& line : grid) {
      for (std::size_t c = 0; c < line.size(); ++c) {
        out << (c + 1 < line.size() ? pad(line[c], width[c] + 2) : line[c]);
      }
      out << '\n';
    }
    out << '\n';
  }
  if (failed > 0) out << failed << " run(s) failed and are excluded\n";
  return out.str();
}

}  // namespace sparseseq::harness
