#include "piw/piwcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "piw/error.hpp"
#include "piw/kernels.hpp"

namespace piw::core {

DiffMode parse_diff_mode(std::string_view name) {
  if (name == "backward") return DiffMode::backward;
  if (name == "two_step") return DiffMode::two_step;
  fail(Errc::InvalidArgument, "unknown diff mode '" + std::string(name) + "'");
}

std::string_view diff_mode_name(DiffMode mode) {
  return mode == DiffMode::backward ? "backward" : "two_step";
}

AggNormalization parse_agg_normalization(std::string_view name) {
  if (name == "exp_inverse") return AggNormalization::exp_inverse;
  if (name == "minmax") return AggNormalization::minmax;
  if (name == "none") return AggNormalization::none;
  fail(Errc::InvalidArgument, "unknown aggressiveness normalization '" + std::string(name) + "'");
}

std::string_view agg_normalization_name(AggNormalization mode) {
  switch (mode) {
    case AggNormalization::exp_inverse: return "exp_inverse";
    case AggNormalization::minmax: return "minmax";
    case AggNormalization::none: return "none";
  }
  return "none";
}

void PIWConfig::validate() const {
  if (!(thr >= 0.0) || !std::isfinite(thr)) fail(Errc::InvalidArgument, "thr must be >= 0");
  if (!(delta_max > 0.0) || !std::isfinite(delta_max)) {
    fail(Errc::InvalidArgument, "delta_max must be > 0");
  }
}

namespace {

kernels::ActivityParams activity_params(double dt, const PIWConfig& cfg) {
  if (!(dt > 0.0)) fail(Errc::InvalidArgument, "dt must be positive");
  cfg.validate();
  return {1.0 / dt, cfg.thr, cfg.delta_max};
}

}  // namespace

std::vector<std::uint8_t> activity_flags(std::span<const double> axis, double dt,
                                         const PIWConfig& cfg) {
  if (axis.size() < 2) fail(Errc::InsufficientSamples, "activity flags need n >= 2");
  const auto params = activity_params(dt, cfg);
  std::vector<std::uint8_t> flags(axis.size() - 1);
  kernels::active().activity_flags(axis.data(), axis.size(), params, flags.data());
  return flags;
}

double duty_cycle(std::span<const double> axis, double dt, const PIWConfig& cfg) {
  if (axis.size() < 2) fail(Errc::InsufficientSamples, "duty cycle needs n >= 2");
  const auto params = activity_params(dt, cfg);
  const auto active = kernels::active().active_count(axis.data(), axis.size(), params);
  return static_cast<double>(active) / static_cast<double>(axis.size() - 1);
}

double aggressiveness(std::span<const double> axis, double dt, const PIWConfig& cfg) {
  if (!(dt > 0.0)) fail(Errc::InvalidArgument, "dt must be positive");
  const std::size_t lag = cfg.diff_mode == DiffMode::backward ? 1 : 2;
  if (axis.size() < lag + 1) {
    fail(Errc::InsufficientSamples, "aggressiveness (" + std::string(diff_mode_name(cfg.diff_mode)) +
                                        ") needs n >= " + std::to_string(lag + 1));
  }
  const double sum_sq = kernels::active().sum_sq_lag_diff(axis.data(), axis.size(), lag);
  const auto terms = static_cast<double>(axis.size() - lag);
  return std::sqrt(sum_sq / terms) / dt;
}

NormalizationFit fit_normalization(std::span<const DutyAgg> trials) {
  if (trials.size() < 3) {
    fail(Errc::DegenerateFit, "normalization fit needs >= 3 trials, got " + std::to_string(trials.size()));
  }
  double mean_x = 0.0, mean_y = 0.0;
  NormalizationFit fit;
  fit.agg_min = trials.front().aggressiveness;
  fit.agg_max = trials.front().aggressiveness;
  for (const auto& t : trials) {
    if (!(t.aggressiveness > 0.0)) {
      fail(Errc::NonPositiveAggressiveness, "normalization fit requires aggressiveness > 0");
    }
    mean_x += t.duty_cycle;
    mean_y += std::log(t.aggressiveness);
    fit.agg_min = std::min(fit.agg_min, t.aggressiveness);
    fit.agg_max = std::max(fit.agg_max, t.aggressiveness);
  }
  const auto n = static_cast<double>(trials.size());
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& t : trials) {
    const double dx = t.duty_cycle - mean_x;
    sxx += dx * dx;
    sxy += dx * (std::log(t.aggressiveness) - mean_y);
  }
  if (!(sxx > 0.0)) fail(Errc::DegenerateFit, "all duty cycles are equal");
  fit.b = sxy / sxx;
  fit.a = mean_y - fit.b * mean_x;
  fit.fitted_on = trials.size();
  double ss = 0.0;
  for (const auto& t : trials) {
    const double r = std::log(t.aggressiveness) - (fit.a + fit.b * t.duty_cycle);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / n);
  return fit;
}

double normalize_aggressiveness(double agg, const NormalizationFit& fit, const PIWConfig& cfg) {
  switch (cfg.agg_normalization) {
    case AggNormalization::none:
      return agg;
    case AggNormalization::minmax: {
      const double range = fit.agg_max - fit.agg_min;
      if (!(range > 0.0)) fail(Errc::InvalidFit, "minmax normalization needs a non-empty range");
      return (agg - fit.agg_min) / range;
    }
    case AggNormalization::exp_inverse: {
      if (!(agg > 0.0)) fail(Errc::NonPositiveAggressiveness, "exp_inverse needs aggressiveness > 0");
      if (fit.b == 0.0 || !std::isfinite(fit.b) || !std::isfinite(fit.a)) {
        fail(Errc::InvalidFit, "exp_inverse needs a finite fit with b != 0");
      }
      return std::clamp((std::log(agg) - fit.a) / fit.b, 0.0, 1.0);
    }
  }
  return agg;
}

double piw1(double duty_cycle, double agg_normalized) {
  return std::sqrt(std::max(0.0, agg_normalized) * std::max(0.0, duty_cycle));
}

DutyAgg raw_axis_metrics(const telemetry::StickTrace& trace, Axis axis, const PIWConfig& cfg) {
  telemetry::validate(trace);
  const auto series = trace.axis(axis);
  return {duty_cycle(series, trace.dt, cfg), aggressiveness(series, trace.dt, cfg)};
}

AxisMetrics finalize_metrics(DutyAgg raw, const NormalizationFit* fit, const PIWConfig& cfg) {
  AxisMetrics m;
  m.duty_cycle = raw.duty_cycle;
  m.aggressiveness = raw.aggressiveness;
  if (raw.aggressiveness == 0.0) {
    m.agg_normalized = 0.0;
  } else if (cfg.agg_normalization == AggNormalization::none) {
    m.agg_normalized = raw.aggressiveness;
  } else {
    if (fit == nullptr) {
      fail(Errc::InvalidFit, std::string(agg_normalization_name(cfg.agg_normalization)) +
                                 " normalization requires a fit");
    }
    m.agg_normalized = normalize_aggressiveness(raw.aggressiveness, *fit, cfg);
  }
  m.piw1 = piw1(m.duty_cycle, m.agg_normalized);
  return m;
}

AxisMetrics compute_axis_metrics(const telemetry::StickTrace& trace, Axis axis,
                                 const NormalizationFit* fit, const PIWConfig& cfg) {
  return finalize_metrics(raw_axis_metrics(trace, axis, cfg), fit, cfg);
}

double metric_value(const AxisMetrics& m, std::string_view metric) {
  if (metric == "duty_cycle") return m.duty_cycle;
  if (metric == "aggressiveness") return m.aggressiveness;
  if (metric == "agg_normalized") return m.agg_normalized;
  if (metric == "piw1") return m.piw1;
  fail(Errc::DimensionMismatch, "unknown metric '" + std::string(metric) + "'");
}

bool is_metric_name(std::string_view metric) {
  return metric == "duty_cycle" || metric == "aggressiveness" || metric == "agg_normalized" ||
         metric == "piw1";
}

bool is_feature_name(std::string_view feature) {
  if (feature.size() < 5 || feature[3] != '_') return false;
  const auto axis = feature.substr(0, 3);
  return (axis == "lon" || axis == "lat") && is_metric_name(feature.substr(4));
}

double feature_value(const AxisMetrics& lon, const AxisMetrics& lat, std::string_view feature) {
  if (!is_feature_name(feature)) {
    fail(Errc::DimensionMismatch, "unknown feature column '" + std::string(feature) + "'");
  }
  const auto& m = feature.substr(0, 3) == "lon" ? lon : lat;
  return metric_value(m, feature.substr(4));
}

}  // namespace piw::core
