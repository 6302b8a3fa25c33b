#pragma once

// Stick log ingestion and uniform-grid resampling.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace piw {

enum class Axis { lon, lat };

std::string_view axis_name(Axis axis);
Axis parse_axis(std::string_view name);

namespace telemetry {

struct Sample {
  double t = 0.0;
  double lon = 0.0;
  double lat = 0.0;
};

struct RawLog {
  std::vector<Sample> samples;
  std::string source_id;
  std::optional<double> declared_max_deflection;

  double max_deflection() const { return declared_max_deflection.value_or(1.0); }
};

/// Column mapping for CSV logs. Columns not named here are ignored.
struct CsvFormat {
  char delimiter = ',';
  std::string time_column = "t";
  std::string lon_column = "lon";
  std::string lat_column = "lat";
};

enum class Interpolation { linear, nearest };

Interpolation parse_interpolation(std::string_view name);
std::string_view interpolation_name(Interpolation interp);

/// Uniformly sampled two-axis stick deflection.
struct StickTrace {
  double t0 = 0.0;
  double dt = 0.01;
  std::vector<double> lon;
  std::vector<double> lat;

  std::size_t size() const { return lon.size(); }
  double time_at(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
  std::span<const double> axis(Axis a) const { return a == Axis::lon ? lon : lat; }
};

RawLog parse_log(std::istream& in, const CsvFormat& format = {}, std::string source_id = {});
RawLog parse_log_text(std::string_view text, const CsvFormat& format = {}, std::string source_id = {});
RawLog load_log(const std::filesystem::path& path, const CsvFormat& format = {});

/// Throws on any RawLog invariant violation (monotone time, finite values, n >= 2).
void validate(std::span<const Sample> samples);

/// Resample onto t0 + k / rate_hz, k = 0.. while the grid time stays within the
/// raw span. Grid points that coincide with a raw timestamp (relative
/// tolerance 1e-9 of the raw interval) take the raw value exactly.
StickTrace resample(std::span<const Sample> samples, double rate_hz = 100.0,
                    Interpolation interp = Interpolation::linear);
inline StickTrace resample(const RawLog& raw, double rate_hz = 100.0,
                           Interpolation interp = Interpolation::linear) {
  return resample(raw.samples, rate_hz, interp);
}

void validate(const StickTrace& trace);

void write_trace_csv(std::ostream& out, const StickTrace& trace);

}  // namespace telemetry
}  // namespace piw
