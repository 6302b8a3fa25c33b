#pragma once

// Offline pipeline shared by the CLI and the acceptance suite:
// traces -> metrics table -> paired comparison / logistic model / plot data.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "piw/metrics_table.hpp"
#include "piw/piwcore.hpp"
#include "piw/pilotsim.hpp"
#include "piw/stats.hpp"
#include "piw/telemetry.hpp"
#include "piw/wlmodel.hpp"

namespace piw::pipeline {

struct TrialInput {
  std::string source;
  std::string subject;
  int trial = 0;
  std::string condition;
  telemetry::StickTrace trace;
};

/// One normalization per axis, fitted on the trials whose aggressiveness is
/// positive. No fit is produced for an axis where every trial is motionless.
wlmodel::ModelNormalization fit_normalizations(std::span<const core::DutyAgg> lon,
                                               std::span<const core::DutyAgg> lat,
                                               core::AggNormalization mode);

/// Rows ordered as the inputs, lon before lat. With `frozen` the supplied
/// constants are used instead of fitting on the inputs.
table::MetricsTable compute_metrics(std::span<const TrialInput> inputs, const core::PIWConfig& cfg,
                                    const wlmodel::ModelNormalization* frozen = nullptr,
                                    unsigned threads = 1);

/// Simulator batch as labeled pipeline inputs (subject "sim", trial =
/// replicate + 1).
std::vector<TrialInput> batch_inputs(std::vector<sim::BatchTrial> batch);

// --- compare ------------------------------------------------------------

enum class Pairing { trial, subject_mean };
Pairing parse_pairing(std::string_view name);
std::string_view pairing_name(Pairing p);

struct CompareOptions {
  Pairing pairing = Pairing::trial;
  double alpha = 0.05;
  std::size_t family_size = 2;
  double normality_alpha = 0.05;
  std::vector<std::string> variables = {"lon_duty_cycle", "lon_aggressiveness", "lon_piw1",
                                        "lat_duty_cycle", "lat_aggressiveness", "lat_piw1"};
};

struct GroupSummary {
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double iqr = 0.0;
};

struct VariableComparison {
  std::string variable;
  std::size_t n_pairs = 0;
  GroupSummary low;
  GroupSummary high;
  std::optional<stats::ShapiroWilkResult> normality;  // on the paired differences
  bool normal = false;
  stats::TestResult test;
};

struct Diagnostics {
  std::optional<stats::CorrelationMatrix> correlation;
  std::optional<stats::VifResult> vif;
  std::optional<stats::TrendResult> lon_trial_trend;
  std::optional<stats::TrendResult> lat_trial_trend;
  std::vector<std::pair<std::string, std::size_t>> outliers;  // per variable
  std::vector<std::pair<std::string, std::size_t>> extremes;
  std::vector<std::string> warnings;
};

struct CompareReport {
  Pairing pairing = Pairing::trial;
  double alpha_adjusted = 0.025;
  std::vector<VariableComparison> variables;
  Diagnostics diagnostics;

  const VariableComparison& find(std::string_view variable) const;
};

/// Paired samples per variable. Trial pairing matches the k-th low trial of
/// a subject (by trial index) with its k-th high trial; subject-mean pairing
/// averages each subject's trials per condition.
std::vector<stats::PairedSample> paired_samples(std::span<const table::TrialFeatures> trials,
                                                const CompareOptions& opts);

CompareReport compare_conditions(const table::MetricsTable& t, const CompareOptions& opts = {});

void write_compare(std::ostream& out, const CompareReport& r, table::Format f);

// --- train / predict ----------------------------------------------------

struct TrainOptions {
  std::vector<std::string> predictors = {"lat_piw1", "lon_piw1"};
  wlmodel::FitOptions fit;
};

wlmodel::FitResult train_model(const table::MetricsTable& t, const TrainOptions& opts = {});

void write_fit_report(std::ostream& out, const wlmodel::FitResult& r, table::Format f);
/// Plain-text coefficient table.
void write_fit_summary(std::ostream& out, const wlmodel::FitResult& r);

/// Recomputes normalized metrics with the model's frozen constants and sets
/// p_high on every row.
table::MetricsTable predict(const table::MetricsTable& t, const wlmodel::LogisticModel& model,
                            const core::PIWConfig& cfg);

// --- plot data ----------------------------------------------------------

struct ScatterPoint {
  std::string source;
  std::string condition;
  Axis axis = Axis::lon;
  double aggressiveness = 0.0;
  double duty_cycle = 0.0;
};

struct BoxStats {
  Axis axis = Axis::lon;
  std::string condition;
  std::size_t n = 0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

/// Tukey box over `values`; whiskers reach the most extreme values inside
/// 1.5 * IQR of the quartiles. Empty input yields n = 0 and NaN statistics.
BoxStats box_stats(std::span<const double> values);

struct PlotData {
  std::vector<ScatterPoint> scatter;
  std::vector<BoxStats> boxes;  // piw1 per axis x {low, high}
};

PlotData plot_data(const table::MetricsTable& t);
void write_plot_data(std::ostream& out, const PlotData& p, table::Format f);

}  // namespace piw::pipeline
