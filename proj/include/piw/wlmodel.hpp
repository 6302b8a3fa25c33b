#pragma once

// Binary logistic regression of workload condition on stick metrics.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "piw/piwcore.hpp"

namespace piw::wlmodel {

inline constexpr int kModelVersion = 1;

struct Standardization {
  std::vector<double> center;
  std::vector<double> scale;
};

/// Normalization constants the model's features were computed with.
struct ModelNormalization {
  core::AggNormalization mode = core::AggNormalization::exp_inverse;
  std::optional<core::NormalizationFit> lon;
  std::optional<core::NormalizationFit> lat;

  const core::NormalizationFit* fit_for(Axis axis) const {
    const auto& f = axis == Axis::lon ? lon : lat;
    return f ? &*f : nullptr;
  }
};

struct LogisticModel {
  std::vector<std::string> predictor_names;
  std::vector<double> coefficients;  // intercept first, then one per predictor
  Eigen::MatrixXd covariance;
  ModelNormalization normalization;
  std::optional<Standardization> standardization;
  bool converged = false;
  bool separation = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  std::size_t n = 0;
  double ridge = 0.0;

  double linear_predictor(std::span<const double> x) const;
};

struct FitOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;
  double ridge = 0.0;
  bool standardize = false;
  bool profile_ci = true;
  double separation_bound = 1e3;
  double confidence = 0.95;
};

struct CoefficientReport {
  std::string name;
  double estimate = 0.0;
  double standard_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  std::optional<double> profile_low;
  std::optional<double> profile_high;
};

struct FitReport {
  std::vector<CoefficientReport> coefficients;
  double tjur_r2 = 0.0;
  std::size_t n = 0;
  std::vector<double> fitted;
  std::vector<std::string> warnings;
};

struct FitResult {
  LogisticModel model;
  FitReport report;
};

/// Maximum likelihood by iteratively reweighted least squares with step
/// halving. `x` holds predictors only (n rows, p columns); the intercept is
/// added internally. Divergence towards separation is flagged on the model
/// and the partial fit returned.
FitResult fit_logistic(const Eigen::MatrixXd& x, std::span<const int> y,
                       std::vector<std::string> predictor_names, const FitOptions& opts = {});

double logistic(double eta);

double predict_probability(const LogisticModel& model, std::span<const double> x);
double predict_probability(const LogisticModel& model, const std::map<std::string, double>& features);

double tjur_r2(std::span<const double> probabilities, std::span<const int> labels);

std::string model_to_json(const LogisticModel& model);
LogisticModel model_from_json(const std::string& text);
void save_model(const LogisticModel& model, const std::filesystem::path& path);
LogisticModel load_model(const std::filesystem::path& path);

}  // namespace piw::wlmodel
