#include "piw/telemetry.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "piw/error.hpp"

namespace piw {

std::string_view axis_name(Axis axis) { return axis == Axis::lon ? "lon" : "lat"; }

Axis parse_axis(std::string_view name) {
  if (name == "lon") return Axis::lon;
  if (name == "lat") return Axis::lat;
  fail(Errc::InvalidArgument, "unknown axis '" + std::string(name) + "'");
}

namespace telemetry {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

double parse_number(std::string_view field, std::size_t row, std::string_view column) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    fail(Errc::NonFiniteValue, "row " + std::to_string(row) + " column '" + std::string(column) +
                                   "': cannot parse '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) {
    fail(Errc::NonFiniteValue,
         "row " + std::to_string(row) + " column '" + std::string(column) + "' is not finite");
  }
  return value;
}

std::size_t find_column(const std::vector<std::string_view>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  fail(Errc::MissingColumn, "column '" + name + "' not found in header");
}

}  // namespace

Interpolation parse_interpolation(std::string_view name) {
  if (name == "linear") return Interpolation::linear;
  if (name == "nearest") return Interpolation::nearest;
  fail(Errc::InvalidArgument, "unknown interpolation '" + std::string(name) + "'");
}

std::string_view interpolation_name(Interpolation interp) {
  return interp == Interpolation::linear ? "linear" : "nearest";
}

RawLog parse_log(std::istream& in, const CsvFormat& format, std::string source_id) {
  RawLog log;
  log.source_id = std::move(source_id);

  std::string line;
  bool have_header = false;
  std::size_t t_col = 0, lon_col = 0, lat_col = 0, width = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto fields = split(content, format.delimiter);
    if (!have_header) {
      t_col = find_column(fields, format.time_column);
      lon_col = find_column(fields, format.lon_column);
      lat_col = find_column(fields, format.lat_column);
      width = std::max({t_col, lon_col, lat_col}) + 1;
      have_header = true;
      continue;
    }
    ++row;
    if (fields.size() < width) {
      fail(Errc::MissingColumn, "row " + std::to_string(row) + " has " +
                                    std::to_string(fields.size()) + " fields, expected at least " +
                                    std::to_string(width));
    }
    Sample s;
    s.t = parse_number(fields[t_col], row, format.time_column);
    s.lon = parse_number(fields[lon_col], row, format.lon_column);
    s.lat = parse_number(fields[lat_col], row, format.lat_column);
    if (!log.samples.empty() && !(s.t > log.samples.back().t)) {
      fail(Errc::NonMonotoneTime, "timestamp not strictly increasing at row " + std::to_string(row));
    }
    log.samples.push_back(s);
  }
  if (!have_header) fail(Errc::EmptyLog, "no header row");
  if (log.samples.size() < 2) {
    fail(Errc::EmptyLog, "log has " + std::to_string(log.samples.size()) + " samples, need >= 2");
  }
  return log;
}

RawLog parse_log_text(std::string_view text, const CsvFormat& format, std::string source_id) {
  std::istringstream in{std::string(text)};
  return parse_log(in, format, std::move(source_id));
}

RawLog load_log(const std::filesystem::path& path, const CsvFormat& format) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open '" + path.string() + "'");
  return parse_log(in, format, path.string());
}

void validate(std::span<const Sample> samples) {
  if (samples.size() < 2) fail(Errc::EmptyLog, "need at least 2 samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.lon) || !std::isfinite(s.lat)) {
      fail(Errc::NonFiniteValue, "sample " + std::to_string(i + 1) + " is not finite");
    }
    if (i > 0 && !(s.t > samples[i - 1].t)) {
      fail(Errc::NonMonotoneTime, "timestamp not strictly increasing at row " + std::to_string(i + 1));
    }
  }
}

StickTrace resample(std::span<const Sample> samples, double rate_hz, Interpolation interp) {
  if (!(rate_hz >= 1.0 && rate_hz <= 1000.0)) {
    fail(Errc::InvalidArgument, "rate_hz must lie in [1, 1000]");
  }
  validate(samples);

  const double dt = 1.0 / rate_hz;
  const double t0 = samples.front().t;
  const double span = samples.back().t - t0;
  constexpr double kSnap = 1e-9;
  if (span < 2.0 * dt * (1.0 - kSnap)) {
    fail(Errc::DegenerateSpan, "duration " + std::to_string(span) + " s is shorter than two grid steps");
  }
  const auto n = static_cast<std::size_t>(std::floor(span * rate_hz + kSnap)) + 1;

  StickTrace out;
  out.t0 = t0;
  out.dt = dt;
  out.lon.resize(n);
  out.lat.resize(n);

  std::size_t j = 0;  // bracket: samples[j].t <= t < samples[j + 1].t
  const std::size_t last = samples.size() - 1;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    while (j + 1 < last && samples[j + 1].t <= t) ++j;
    const Sample& a = samples[j];
    const Sample& b = samples[j + 1];
    double w = (t - a.t) / (b.t - a.t);
    if (w < kSnap) w = 0.0;
    if (w > 1.0 - kSnap) w = 1.0;
    if (interp == Interpolation::nearest) w = w < 0.5 ? 0.0 : 1.0;
    if (w == 0.0) {
      out.lon[k] = a.lon;
      out.lat[k] = a.lat;
    } else if (w == 1.0) {
      out.lon[k] = b.lon;
      out.lat[k] = b.lat;
    } else {
      out.lon[k] = a.lon + (b.lon - a.lon) * w;
      out.lat[k] = a.lat + (b.lat - a.lat) * w;
    }
  }
  return out;
}

void validate(const StickTrace& trace) {
  if (!(trace.dt > 0.0)) fail(Errc::InvalidArgument, "trace dt must be positive");
  if (trace.lon.size() != trace.lat.size()) fail(Errc::InvalidArgument, "axis length mismatch");
  if (trace.lon.size() < 2) fail(Errc::InsufficientSamples, "trace needs at least 2 samples");
}

void write_trace_csv(std::ostream& out, const StickTrace& trace) {
  const auto old_precision = out.precision(17);
  out << "t,lon,lat\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << trace.time_at(i) << ',' << trace.lon[i] << ',' << trace.lat[i] << '\n';
  }
  out.precision(old_precision);
}

}  // namespace telemetry
}  // namespace piw
