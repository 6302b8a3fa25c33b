#pragma once

// Per-trial, per-axis metrics table and its CSV / JSON encodings.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "piw/piwcore.hpp"
#include "piw/wlmodel.hpp"

namespace piw::table {

enum class Format { csv, json };
Format parse_format(std::string_view name);
std::string_view format_name(Format f);

struct MetricsRow {
  std::string source;
  std::string subject;
  int trial = 0;
  std::string condition;
  Axis axis = Axis::lon;
  core::AxisMetrics metrics;
  std::optional<double> p_high;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
  wlmodel::ModelNormalization normalization;
};

void write_csv(std::ostream& out, const MetricsTable& t);
void write_json(std::ostream& out, const MetricsTable& t);
void write(std::ostream& out, const MetricsTable& t, Format f);

MetricsTable read_csv(std::istream& in);
MetricsTable read_json(std::istream& in);
/// Sniffs the format from the first non-blank character.
MetricsTable read(std::istream& in);
MetricsTable load(const std::filesystem::path& path);

/// Both axes of one trial.
struct TrialFeatures {
  std::string source;
  std::string subject;
  int trial = 0;
  std::string condition;
  core::AxisMetrics lon;
  core::AxisMetrics lat;
};

/// Groups rows into trials keyed by (source, subject, trial, condition), in
/// first-appearance order. Every trial needs both axes.
std::vector<TrialFeatures> pivot(const MetricsTable& t);

/// low / NoNBack / 0 -> 0, high / NBack / 1 -> 1 (case-insensitive).
int condition_label(std::string_view condition);

}  // namespace piw::table
