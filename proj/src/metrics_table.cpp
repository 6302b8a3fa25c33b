#include "piw/metrics_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "piw/error.hpp"
#include "piw/json_io.hpp"

namespace piw::table {

using json_io::json;

Format parse_format(std::string_view name) {
  if (name == "csv") return Format::csv;
  if (name == "json") return Format::json;
  fail(Errc::InvalidArgument, "unknown output format '" + std::string(name) + "'");
}

std::string_view format_name(Format f) { return f == Format::csv ? "csv" : "json"; }

namespace {

constexpr const char* kCsvColumns[] = {
    "source",        "subject", "trial",  "condition", "axis",      "duty_cycle",     "aggressiveness",
    "agg_normalized", "piw1",   "norm_mode", "norm_a", "norm_b", "norm_fitted_on", "norm_residual_rms",
    "norm_agg_min",  "norm_agg_max"};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_double(const std::string& s, std::size_t row, const std::string& column) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(Errc::NonFiniteValue, "metrics row " + std::to_string(row) + " column '" + column + "': bad number '" + s + "'");
  }
  return v;
}

const core::NormalizationFit* fit_of(const MetricsTable& t, Axis axis) { return t.normalization.fit_for(axis); }

json row_json(const MetricsRow& r) {
  json j;
  j["source"] = r.source;
  j["subject"] = r.subject;
  j["trial"] = r.trial;
  j["condition"] = r.condition;
  j["axis"] = axis_name(r.axis);
  j["duty_cycle"] = r.metrics.duty_cycle;
  j["aggressiveness"] = r.metrics.aggressiveness;
  j["agg_normalized"] = r.metrics.agg_normalized;
  j["piw1"] = r.metrics.piw1;
  if (r.p_high) j["p_high"] = *r.p_high;
  return j;
}

}  // namespace

void write_csv(std::ostream& out, const MetricsTable& t) {
  const bool with_p = std::any_of(t.rows.begin(), t.rows.end(), [](const MetricsRow& r) { return r.p_high.has_value(); });
  for (std::size_t i = 0; i < std::size(kCsvColumns); ++i) out << (i ? "," : "") << kCsvColumns[i];
  if (with_p) out << ",p_high";
  out << '\n';
  const auto mode = core::agg_normalization_name(t.normalization.mode);
  for (const auto& r : t.rows) {
    const auto* fit = fit_of(t, r.axis);
    out << csv_field(r.source) << ',' << csv_field(r.subject) << ',' << r.trial << ',' << csv_field(r.condition) << ','
        << axis_name(r.axis) << ',' << fmt(r.metrics.duty_cycle) << ',' << fmt(r.metrics.aggressiveness) << ','
        << fmt(r.metrics.agg_normalized) << ',' << fmt(r.metrics.piw1) << ',' << mode << ',';
    if (fit) {
      out << fmt(fit->a) << ',' << fmt(fit->b) << ',' << fit->fitted_on << ',' << fmt(fit->residual_rms) << ','
          << fmt(fit->agg_min) << ',' << fmt(fit->agg_max);
    } else {
      out << ",,,,,";
    }
    if (with_p) out << ',' << (r.p_high ? fmt(*r.p_high) : "");
    out << '\n';
  }
}

void write_json(std::ostream& out, const MetricsTable& t) {
  json doc;
  doc["kind"] = "piw.metrics";
  doc["version"] = 1;
  doc["normalization"] = json_io::to_json(t.normalization);
  json rows = json::array();
  for (const auto& r : t.rows) rows.push_back(row_json(r));
  doc["rows"] = std::move(rows);
  out << doc.dump(2) << '\n';
}

void write(std::ostream& out, const MetricsTable& t, Format f) {
  if (f == Format::csv) {
    write_csv(out, t);
  } else {
    write_json(out, t);
  }
}

MetricsTable read_csv(std::istream& in) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!line.empty() && line != "\r") {
      header = split_csv(line);
      break;
    }
  }
  if (header.empty()) fail(Errc::EmptyLog, "metrics table has no header");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"source", "subject", "trial", "condition", "axis", "duty_cycle", "aggressiveness",
                               "agg_normalized", "piw1"}) {
    if (!col.count(required)) fail(Errc::MissingColumn, std::string("metrics table lacks column '") + required + "'");
  }
  const bool has_norm = col.count("norm_mode") && col.count("norm_a") && col.count("norm_b");
  const bool has_p = col.count("p_high") > 0;

  MetricsTable t;
  t.normalization.mode = core::AggNormalization::none;
  bool mode_seen = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto f = split_csv(line);
    if (f.size() < header.size()) fail(Errc::MissingColumn, "metrics row " + std::to_string(row) + " is short");
    auto get = [&](const char* name) -> const std::string& { return f[col.at(name)]; };
    MetricsRow r;
    r.source = get("source");
    r.subject = get("subject");
    r.trial = static_cast<int>(parse_double(get("trial"), row, "trial"));
    r.condition = get("condition");
    r.axis = parse_axis(get("axis"));
    r.metrics.duty_cycle = parse_double(get("duty_cycle"), row, "duty_cycle");
    r.metrics.aggressiveness = parse_double(get("aggressiveness"), row, "aggressiveness");
    r.metrics.agg_normalized = parse_double(get("agg_normalized"), row, "agg_normalized");
    r.metrics.piw1 = parse_double(get("piw1"), row, "piw1");
    if (has_p && !get("p_high").empty()) r.p_high = parse_double(get("p_high"), row, "p_high");
    if (has_norm) {
      const auto mode = core::parse_agg_normalization(get("norm_mode"));
      if (mode_seen && mode != t.normalization.mode) {
        fail(Errc::MalformedFile, "metrics table mixes normalization modes");
      }
      t.normalization.mode = mode;
      mode_seen = true;
      if (!get("norm_a").empty()) {
        core::NormalizationFit fit;
        fit.a = parse_double(get("norm_a"), row, "norm_a");
        fit.b = parse_double(get("norm_b"), row, "norm_b");
        if (col.count("norm_fitted_on")) fit.fitted_on = static_cast<std::size_t>(parse_double(get("norm_fitted_on"), row, "norm_fitted_on"));
        if (col.count("norm_residual_rms")) fit.residual_rms = parse_double(get("norm_residual_rms"), row, "norm_residual_rms");
        if (col.count("norm_agg_min")) fit.agg_min = parse_double(get("norm_agg_min"), row, "norm_agg_min");
        if (col.count("norm_agg_max")) fit.agg_max = parse_double(get("norm_agg_max"), row, "norm_agg_max");
        (r.axis == Axis::lon ? t.normalization.lon : t.normalization.lat) = fit;
      }
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

MetricsTable read_json(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::MalformedFile, std::string("metrics JSON is malformed: ") + e.what());
  }
  constexpr auto E = Errc::MalformedFile;
  if (!doc.is_object()) fail(E, "metrics JSON is not an object");
  if (doc.contains("version") && doc["version"] != 1) fail(E, "unsupported metrics version " + doc["version"].dump());
  MetricsTable t;
  t.normalization = json_io::normalization_from_json(json_io::require(doc, "normalization", "", E), "normalization.", E);
  const auto& rows = json_io::require(doc, "rows", "", E);
  if (!rows.is_array()) fail(E, "field 'rows' is not an array");
  try {
    for (const auto& j : rows) {
      MetricsRow r;
      r.source = j.at("source").get<std::string>();
      r.subject = j.at("subject").get<std::string>();
      r.trial = j.at("trial").get<int>();
      r.condition = j.at("condition").get<std::string>();
      r.axis = parse_axis(j.at("axis").get<std::string>());
      r.metrics.duty_cycle = j.at("duty_cycle").get<double>();
      r.metrics.aggressiveness = j.at("aggressiveness").get<double>();
      r.metrics.agg_normalized = j.at("agg_normalized").get<double>();
      r.metrics.piw1 = j.at("piw1").get<double>();
      if (j.contains("p_high")) r.p_high = j.at("p_high").get<double>();
      t.rows.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(Errc::MissingColumn, std::string("metrics JSON row is malformed: ") + e.what());
  }
  return t;
}

MetricsTable read(std::istream& in) {
  in >> std::ws;
  if (in.peek() == '{') return read_json(in);
  return read_csv(in);
}

MetricsTable load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open '" + path.string() + "'");
  return read(in);
}

std::vector<TrialFeatures> pivot(const MetricsTable& t) {
  std::vector<TrialFeatures> trials;
  std::map<std::tuple<std::string, std::string, int, std::string>, std::size_t> index;
  std::vector<std::pair<bool, bool>> seen;
  for (const auto& r : t.rows) {
    const auto key = std::make_tuple(r.source, r.subject, r.trial, r.condition);
    auto [it, inserted] = index.try_emplace(key, trials.size());
    if (inserted) {
      trials.push_back({r.source, r.subject, r.trial, r.condition, {}, {}});
      seen.emplace_back(false, false);
    }
    auto& tf = trials[it->second];
    auto& flags = seen[it->second];
    bool& flag = r.axis == Axis::lon ? flags.first : flags.second;
    if (flag) fail(Errc::MalformedFile, "duplicate " + std::string(axis_name(r.axis)) + " row for trial '" + r.source + "'");
    flag = true;
    (r.axis == Axis::lon ? tf.lon : tf.lat) = r.metrics;
  }
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (!seen[i].first || !seen[i].second) {
      fail(Errc::MissingColumn, "trial '" + trials[i].source + "' lacks one axis");
    }
  }
  return trials;
}

int condition_label(std::string_view condition) {
  std::string c(condition);
  std::transform(c.begin(), c.end(), c.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (c == "low" || c == "nonback" || c == "no_nback" || c == "0") return 0;
  if (c == "high" || c == "nback" || c == "1") return 1;
  fail(Errc::MalformedFile, "unknown condition label '" + std::string(condition) + "'");
}

}  // namespace piw::table
