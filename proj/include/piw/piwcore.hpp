#pragma once

// Duty cycle, aggressiveness and one-dimensional pilot inceptor workload.
//
// Per axis, with deflections d[0..n-1] on a uniform grid of step dt:
//   active interval i (1..n-1): rate = |d[i] - d[i-1]| / dt with rate > 0 and
//                               rate >= thr,  or  |d[i]| >= delta_max
//   duty cycle     = active intervals / (n - 1)
//   aggressiveness = RMS over intervals of (d[i] - d[i-lag]) / dt, lag 1 (backward)
//                    or 2 (two_step)
//   piw1           = sqrt(normalized aggressiveness * duty cycle)

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "piw/telemetry.hpp"

namespace piw::core {

enum class DiffMode { backward, two_step };
enum class AggNormalization { exp_inverse, minmax, none };

DiffMode parse_diff_mode(std::string_view name);
std::string_view diff_mode_name(DiffMode mode);
AggNormalization parse_agg_normalization(std::string_view name);
std::string_view agg_normalization_name(AggNormalization mode);

struct PIWConfig {
  double thr = 0.0;
  double delta_max = 1.0;
  DiffMode diff_mode = DiffMode::backward;
  AggNormalization agg_normalization = AggNormalization::exp_inverse;

  void validate() const;
};

struct AxisMetrics {
  double duty_cycle = 0.0;
  double aggressiveness = 0.0;
  double agg_normalized = 0.0;
  double piw1 = 0.0;
};

/// ln(aggressiveness) = a + b * duty_cycle, fitted across trials. The
/// aggressiveness range of the fitting set backs the minmax mode.
struct NormalizationFit {
  double a = 0.0;
  double b = 0.0;
  std::size_t fitted_on = 0;
  double residual_rms = 0.0;
  double agg_min = 0.0;
  double agg_max = 0.0;
};

struct DutyAgg {
  double duty_cycle = 0.0;
  double aggressiveness = 0.0;
};

std::vector<std::uint8_t> activity_flags(std::span<const double> axis, double dt,
                                         const PIWConfig& cfg);
double duty_cycle(std::span<const double> axis, double dt, const PIWConfig& cfg);
double aggressiveness(std::span<const double> axis, double dt, const PIWConfig& cfg);

NormalizationFit fit_normalization(std::span<const DutyAgg> trials);

double normalize_aggressiveness(double agg, const NormalizationFit& fit, const PIWConfig& cfg);

double piw1(double duty_cycle, double agg_normalized);

/// Raw (unnormalized) pair for one axis of a trace.
DutyAgg raw_axis_metrics(const telemetry::StickTrace& trace, Axis axis, const PIWConfig& cfg);

/// Completes a raw pair. A trial with zero aggressiveness normalizes to 0 in
/// every mode (no stick motion means no workload contribution).
AxisMetrics finalize_metrics(DutyAgg raw, const NormalizationFit* fit, const PIWConfig& cfg);

AxisMetrics compute_axis_metrics(const telemetry::StickTrace& trace, Axis axis,
                                 const NormalizationFit* fit, const PIWConfig& cfg);

/// Field lookup by name: duty_cycle, aggressiveness, agg_normalized, piw1.
double metric_value(const AxisMetrics& m, std::string_view metric);
bool is_metric_name(std::string_view metric);

/// Feature lookup of the form "<axis>_<metric>", e.g. "lon_piw1".
double feature_value(const AxisMetrics& lon, const AxisMetrics& lat, std::string_view feature);
bool is_feature_name(std::string_view feature);

}  // namespace piw::core
