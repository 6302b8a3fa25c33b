#pragma once

// Paired comparison battery: normality, paired t, Wilcoxon signed-rank,
// IQR outlier flags, correlation, VIF and trial-order regression.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace piw::stats {

struct PairedSample {
  std::vector<double> low;
  std::vector<double> high;
  std::string label;

  void validate() const;
};

enum class EffectKind { cohens_d, rank_biserial_r };
std::string_view effect_kind_name(EffectKind kind);

/// Statistics are signed by the paired difference high - low.
struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double effect_size = 0.0;
  EffectKind effect_kind = EffectKind::cohens_d;
  std::string method;
  double alpha_adjusted = 0.05;
  double df = 0.0;       // paired t only
  double w_plus = 0.0;   // Wilcoxon only: sum of positive ranks
  std::size_t n_used = 0;
  bool exact = false;

  bool significant() const { return p_value < alpha_adjusted; }
};

struct TestOptions {
  double alpha = 0.05;
  std::size_t family_size = 1;
};

double bonferroni_alpha(double alpha, std::size_t family_size);

struct ShapiroWilkResult {
  double w = 1.0;
  double p_value = 1.0;
};

ShapiroWilkResult shapiro_wilk(std::span<const double> x);

TestResult paired_t_test(const PairedSample& s, const TestOptions& opts = {});

enum class WilcoxonMethod { automatic, exact, normal };

/// Zero differences are dropped; ties get mid-ranks. `automatic` is exact for
/// m <= 20 remaining pairs and the continuity-corrected normal approximation
/// with tie-corrected variance otherwise.
TestResult wilcoxon_signed_rank(const PairedSample& s, const TestOptions& opts = {},
                                WilcoxonMethod method = WilcoxonMethod::automatic);

/// Type-7 (linear interpolation) sample quantile of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double iqr() const { return q3 - q1; }
};
Quartiles quartiles(std::span<const double> x);

struct OutlierFlag {
  double value = 0.0;
  bool is_outlier = false;
  bool is_extreme = false;
};

std::vector<OutlierFlag> flag_outliers(std::span<const double> x);

struct NamedColumn {
  std::string name;
  std::vector<double> values;
};

struct CorrelationMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd r;
};

CorrelationMatrix correlation_matrix(std::span<const NamedColumn> columns);

struct VifResult {
  std::vector<std::string> names;
  std::vector<double> vif;  // +inf for a column perfectly explained by the others
  bool singular = false;
};

VifResult vif(std::span<const NamedColumn> design);

struct TrialPoint {
  double index = 0.0;
  double value = 0.0;
};

struct TrendResult {
  double slope = 0.0;
  double intercept = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
};

TrendResult trial_order_effect(std::span<const TrialPoint> trials);

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator).
double stddev(std::span<const double> x);

}  // namespace piw::stats
