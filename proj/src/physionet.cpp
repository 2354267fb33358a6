// SPDX-License-Identifier: Apache-2.0
#include "sparseseq/ingest/physionet.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "sparseseq/errors.hpp"
#include "sparseseq/ingest/preprocess.hpp"

namespace sparseseq::ingest {

std::vector<std::string> PhysionetOptions::default_physionet_variables() {
  return {"ALP",   "ALT",     "AST",     "Albumin", "BUN",      "Bilirubin",   "Cholesterol",
          "Creatinine", "DiasABP", "FiO2", "GCS",     "Glucose",  "HCO3",        "HCT",
          "HR",    "K",       "Lactate", "MAP",     "MechVent", "Mg",          "NIDiasABP",
          "NIMAP", "NISysABP", "Na",     "PaCO2",   "PaO2",     "Platelets",   "RespRate",
          "SaO2",  "SysABP",  "Temp",    "TroponinI", "TroponinT", "Urine",    "WBC",
          "Weight", "pH"};
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

double parse_number(const std::string& text, std::size_t line) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("not a number: '" + text + "'", line);
  return v;
}

}  // namespace

double parse_clock(const std::string& text, std::size_t line) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ParseError("expected HH:MM, got '" + text + "'", line);
  const double hh = parse_number(text.substr(0, colon), line);
  const double mm = parse_number(text.substr(colon + 1), line);
  if (hh < 0 || mm < 0 || mm >= 60) throw ParseError("bad clock '" + text + "'", line);
  return hh + mm / 60.0;
}

Sample parse_physionet_record(std::istream& in, const std::string& id,
                              const PhysionetOptions& options) {
  std::vector<Event> events;
  std::vector<double> statics(options.descriptors.size(), 0.0);
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty() || text == "\r") continue;
    const auto cells = split_csv(text);
    if (cells.size() != 3) throw ParseError("expected Time,Parameter,Value", line);
    if (line == 1 && cells[0] == "Time") continue;
    const double t = parse_clock(cells[0], line);
    const double v = parse_number(cells[2], line);
    const auto desc = std::find(options.descriptors.begin(), options.descriptors.end(), cells[1]);
    if (t == 0.0 && desc != options.descriptors.end()) {
      if (v != -1.0) statics[desc - options.descriptors.begin()] = v;
      continue;
    }
    if (cells[1] == "RecordID") continue;
    events.push_back({t, cells[1], v});
  }
  Sample s = aggregate(events, options.variables, options.resolution);
  s.id = id;
  s.static_features = std::move(statics);
  return s;
}

std::map<std::string, int> parse_outcomes(std::istream& in, const std::string& column) {
  std::map<std::string, int> out;
  std::string text;
  std::size_t line = 0, col = 0, id_col = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    const auto cells = split_csv(text);
    if (line == 1) {
      const auto c = std::find(cells.begin(), cells.end(), column);
      const auto r = std::find(cells.begin(), cells.end(), "RecordID");
      if (c == cells.end() || r == cells.end()) {
        throw ParseError("outcomes header lacks RecordID or '" + column + "'", line);
      }
      col = c - cells.begin();
      id_col = r - cells.begin();
      continue;
    }
    if (cells.size() <= std::max(col, id_col)) throw ParseError("short outcomes row", line);
    out[cells[id_col]] = static_cast<int>(parse_number(cells[col], line));
  }
  return out;
}

TimeSeriesDataset load_physionet(const std::filesystem::path& records_dir,
                                 const std::filesystem::path& outcomes_file,
                                 const PhysionetOptions& options) {
  std::ifstream outcomes(outcomes_file);
  if (!outcomes) throw ConfigError("cannot read " + outcomes_file.string());
  const auto labels = parse_outcomes(outcomes, options.outcome_column);

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(records_dir)) {
    if (entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  TimeSeriesDataset ds;
  ds.variable_names = options.variables;
  ds.n_static = options.descriptors.size();
  ds.n_classes = 2;
  for (const auto& path : files) {
    const std::string id = path.stem().string();
    auto it = labels.find(id);
    if (it == labels.end()) continue;
    std::ifstream in(path);
    try {
      Sample s = parse_physionet_record(in, id, options);
      s.label = it->second;
      ds.samples.push_back(std::move(s));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ", " + e.what());
    }
  }
  ds.validate();
  return ds;
}

}  // namespace sparseseq::ingest
