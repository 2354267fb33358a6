// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "sparseseq/ingest/dataset.hpp"

// PhysioNet 2012 challenge layout: one text file per ICU stay with rows
// "Time,Parameter,Value" (time as HH:MM since admission), general descriptors
// at 00:00, -1 for an unknown descriptor; an outcomes file with columns
// RecordID,...,In-hospital_death.

namespace sparseseq::ingest {

struct PhysionetOptions {
  double resolution = 1.0;  // hours
  std::vector<std::string> variables = default_physionet_variables();
  std::vector<std::string> descriptors = {"Age", "Gender", "Height", "ICUType", "Weight"};
  std::string outcome_column = "In-hospital_death";

  static std::vector<std::string> default_physionet_variables();
};

/// "HH:MM" -> hours. Throws ParseError on malformed input.
double parse_clock(const std::string& text, std::size_t line);

/// One record. Descriptors found at time 00:00 become static features
/// (unknown ones are 0); every other known parameter is aggregated onto the grid.
Sample parse_physionet_record(std::istream& in, const std::string& id,
                              const PhysionetOptions& options);

/// RecordID -> label from an outcomes file.
std::map<std::string, int> parse_outcomes(std::istream& in, const std::string& column);

/// Every *.txt record in `records_dir` that has an outcome, ordered by id.
TimeSeriesDataset load_physionet(const std::filesystem::path& records_dir,
                                 const std::filesystem::path& outcomes_file,
                                 const PhysionetOptions& options = {});

}  // namespace sparseseq::ingest
