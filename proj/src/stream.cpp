#include "piw/stream.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "piw/error.hpp"

namespace piw::stream {

using json = nlohmann::ordered_json;

Warmup parse_warmup(std::string_view name) {
  if (name == "suppress") return Warmup::suppress;
  if (name == "partial") return Warmup::partial;
  fail(Errc::InvalidArgument, "unknown warmup policy '" + std::string(name) + "'");
}

std::string_view warmup_name(Warmup w) { return w == Warmup::suppress ? "suppress" : "partial"; }

void WindowConfig::validate() const {
  if (!(hop > 0.0) || !(hop <= window) || !std::isfinite(window)) {
    fail(Errc::InvalidArgument, "window configuration requires 0 < hop <= window");
  }
  if (!(rate_hz >= 1.0 && rate_hz <= 1000.0)) fail(Errc::InvalidArgument, "rate_hz must lie in [1, 1000]");
}

const wlmodel::ModelNormalization& StreamContext::effective_normalization() const {
  static const wlmodel::ModelNormalization unnormalized{core::AggNormalization::none, std::nullopt, std::nullopt};
  if (model) return model->normalization;
  if (normalization) return *normalization;
  return unnormalized;
}

void StreamContext::validate() const {
  window.validate();
  piw.validate();
  if (model) {
    for (const auto& name : model->predictor_names) {
      if (!core::is_feature_name(name)) {
        fail(Errc::DimensionMismatch, "model predictor '" + name + "' is not a stick metric feature");
      }
    }
  }
}

std::span<const telemetry::Sample> select_window(std::span<const telemetry::Sample> sorted, double t_end,
                                                 double window) {
  const double lo = t_end - window - kBoundaryEpsilon;
  const double hi = t_end + kBoundaryEpsilon;
  const auto first = std::lower_bound(sorted.begin(), sorted.end(), lo,
                                      [](const telemetry::Sample& s, double t) { return s.t < t; });
  const auto last = std::upper_bound(first, sorted.end(), hi,
                                     [](double t, const telemetry::Sample& s) { return t < s.t; });
  return {first, last};
}

std::optional<WindowEstimate> evaluate_window(std::span<const telemetry::Sample> slice, double t_end,
                                              const StreamContext& ctx) {
  if (slice.size() < 2) return std::nullopt;
  const double span = slice.back().t - slice.front().t;
  if (span < 2.0 / ctx.window.rate_hz * (1.0 - 1e-9)) return std::nullopt;

  const auto trace = telemetry::resample(slice, ctx.window.rate_hz, ctx.window.interpolation);
  const auto& norm = ctx.effective_normalization();
  core::PIWConfig cfg = ctx.piw;
  cfg.agg_normalization = norm.mode;

  WindowEstimate e;
  e.t_end = t_end;
  e.samples_used = trace.size();
  e.lon = core::compute_axis_metrics(trace, Axis::lon, norm.fit_for(Axis::lon), cfg);
  e.lat = core::compute_axis_metrics(trace, Axis::lat, norm.fit_for(Axis::lat), cfg);
  if (ctx.model) {
    std::vector<double> x;
    x.reserve(ctx.model->predictor_names.size());
    for (const auto& name : ctx.model->predictor_names) x.push_back(core::feature_value(e.lon, e.lat, name));
    e.p_high = wlmodel::predict_probability(*ctx.model, x);
  }
  return e;
}

Session::Session(std::shared_ptr<const StreamContext> ctx) : ctx_(std::move(ctx)) {
  if (!ctx_) fail(Errc::InvalidArgument, "session needs a context");
  ctx_->validate();
}

double Session::emission_time(std::size_t k) const {
  const auto& w = ctx_->window;
  const double first = w.warmup == Warmup::suppress ? w.window : w.hop;
  return t_first_ + first + static_cast<double>(k) * w.hop;
}

std::vector<WindowEstimate> Session::ingest(const telemetry::Sample& record) {
  if (!std::isfinite(record.t) || !std::isfinite(record.lon) || !std::isfinite(record.lat)) {
    ++counters_.errors;
    fail(Errc::NonFiniteValue, "record contains a non-finite value");
  }
  ++counters_.records;
  if (started_ && !(record.t > last_t_)) {
    ++counters_.dropped;
    fail(Errc::OutOfOrderRecord, "t = " + std::to_string(record.t) + " is not after " + std::to_string(last_t_));
  }
  if (!started_) {
    started_ = true;
    t_first_ = record.t;
  }
  last_t_ = record.t;
  buffer_.push_back(record);

  std::vector<WindowEstimate> out;
  const auto& w = ctx_->window;
  while (record.t >= emission_time(next_emission_) - kBoundaryEpsilon) {
    const double t_end = emission_time(next_emission_);
    scratch_.assign(buffer_.begin(), buffer_.end());
    const auto slice = select_window(scratch_, t_end, w.window);
    if (auto estimate = evaluate_window(slice, t_end, *ctx_)) {
      out.push_back(*estimate);
      ++counters_.windows_emitted;
    } else {
      ++counters_.windows_skipped;
    }
    ++next_emission_;
    const double keep_from = emission_time(next_emission_) - w.window - kBoundaryEpsilon;
    while (!buffer_.empty() && buffer_.front().t < keep_from) buffer_.pop_front();
  }
  return out;
}

namespace {

void put_metrics(json& j, std::string_view axis, const core::AxisMetrics& m) {
  const std::string prefix(axis);
  j[prefix + "_duty_cycle"] = m.duty_cycle;
  j[prefix + "_aggressiveness"] = m.aggressiveness;
  j[prefix + "_agg_normalized"] = m.agg_normalized;
  j[prefix + "_piw1"] = m.piw1;
}

}  // namespace

std::string estimate_to_json(const WindowEstimate& e) {
  json j;
  j["type"] = "estimate";
  j["t_end"] = e.t_end;
  j["samples_used"] = e.samples_used;
  put_metrics(j, "lon", e.lon);
  put_metrics(j, "lat", e.lat);
  if (e.p_high) j["p_high"] = *e.p_high;
  return j.dump();
}

std::string summary_to_json(const SessionCounters& c) {
  json j;
  j["type"] = "summary";
  j["records"] = c.records;
  j["dropped"] = c.dropped;
  j["windows_emitted"] = c.windows_emitted;
  j["errors"] = c.errors;
  return j.dump();
}

LineProtocol::LineProtocol(std::shared_ptr<const StreamContext> ctx) : session_(std::move(ctx)) {}

std::vector<std::string> LineProtocol::on_line(std::string_view line) {
  ++line_no_;
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
  if (line.empty()) return {};

  auto error_line = [&](const std::string& message) {
    json j;
    j["type"] = "error";
    j["line"] = line_no_;
    j["error"] = message;
    return std::vector<std::string>{j.dump()};
  };

  telemetry::Sample record;
  try {
    const auto j = json::parse(line);
    if (!j.is_object()) throw std::invalid_argument("record must be a JSON object");
    for (const char* key : {"t", "lon", "lat"}) {
      if (!j.contains(key) || !j.at(key).is_number()) {
        throw std::invalid_argument(std::string("field '") + key + "' missing or not a number");
      }
    }
    record.t = j.at("t").get<double>();
    record.lon = j.at("lon").get<double>();
    record.lat = j.at("lat").get<double>();
  } catch (const std::exception& e) {
    ++session_.counters().errors;
    return error_line(std::string(errc_name(Errc::MalformedRecord)) + ": " + e.what());
  }

  try {
    std::vector<std::string> out;
    for (const auto& e : session_.ingest(record)) out.push_back(estimate_to_json(e));
    return out;
  } catch (const Error& e) {
    return error_line(e.what());
  }
}

std::string LineProtocol::on_eof() const { return summary_to_json(session_.counters()); }

void run_stdio(std::istream& in, std::ostream& out, std::shared_ptr<const StreamContext> ctx) {
  LineProtocol protocol(std::move(ctx));
  std::string line;
  while (std::getline(in, line)) {
    for (const auto& reply : protocol.on_line(line)) out << reply << '\n';
    out.flush();
  }
  out << protocol.on_eof() << '\n';
  out.flush();
}

}  // namespace piw::stream
