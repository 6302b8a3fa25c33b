#include "piw/wlmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include "piw/error.hpp"
#include "piw/json_io.hpp"

namespace piw::wlmodel {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

namespace {

double softplus(double eta) { return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double log_likelihood(const MatrixXd& xd, const VectorXd& y, const VectorXd& beta, const VectorXd& offset) {
  const VectorXd eta = xd * beta + offset;
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - softplus(eta(i));
  return ll;
}

double penalty(const VectorXd& beta, double ridge, bool has_intercept) {
  if (ridge == 0.0) return 0.0;
  const Index start = has_intercept ? 1 : 0;
  return 0.5 * ridge * beta.tail(beta.size() - start).squaredNorm();
}

struct IrlsOutcome {
  VectorXd beta;
  MatrixXd information;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  bool separation = false;
};

// Penalized IRLS on design `xd` (intercept column already present when
// has_intercept) with a fixed linear offset.
IrlsOutcome irls(const MatrixXd& xd, const VectorXd& y, const VectorXd& offset, VectorXd beta,
                 const FitOptions& opts, bool has_intercept) {
  const Index p = xd.cols();
  IrlsOutcome out;
  double objective = log_likelihood(xd, y, beta, offset) - penalty(beta, opts.ridge, has_intercept);
  MatrixXd ridge_diag = MatrixXd::Zero(p, p);
  for (Index j = has_intercept ? 1 : 0; j < p; ++j) ridge_diag(j, j) = opts.ridge;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    out.iterations = it;
    const VectorXd eta = xd * beta + offset;
    VectorXd mu(eta.size()), w(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
      mu(i) = logistic(eta(i));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    const MatrixXd info = xd.transpose() * w.asDiagonal() * xd + ridge_diag;
    const VectorXd grad = xd.transpose() * (y - mu) - ridge_diag * beta;
    const Eigen::LDLT<MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    VectorXd delta = ldlt.solve(grad);
    if (!delta.allFinite()) break;

    double step = 1.0;
    VectorXd candidate = beta + delta;
    double cand_obj = log_likelihood(xd, y, candidate, offset) - penalty(candidate, opts.ridge, has_intercept);
    int halvings = 0;
    while (cand_obj < objective - 1e-12 * std::fabs(objective) && halvings < 40) {
      step *= 0.5;
      candidate = beta + step * delta;
      cand_obj = log_likelihood(xd, y, candidate, offset) - penalty(candidate, opts.ridge, has_intercept);
      ++halvings;
    }
    const double change = (step * delta).cwiseAbs().maxCoeff();
    const bool improving = cand_obj > objective;
    beta = candidate;
    objective = cand_obj;

    if (change < opts.tolerance) {
      out.converged = true;
      break;
    }
    if (beta.cwiseAbs().maxCoeff() > opts.separation_bound && improving) {
      out.separation = true;
      break;
    }
    // Complete separation: every fitted probability has collapsed onto its label.
    const VectorXd eta_new = xd * beta + offset;
    double worst = 0.0;
    for (Index i = 0; i < eta_new.size(); ++i) worst = std::max(worst, std::fabs(y(i) - logistic(eta_new(i))));
    if (worst < 1e-8) {
      out.separation = true;
      break;
    }
  }
  const VectorXd eta = xd * beta + offset;
  VectorXd w(eta.size());
  for (Index i = 0; i < eta.size(); ++i) {
    const double m = logistic(eta(i));
    w(i) = m * (1.0 - m);
  }
  out.information = xd.transpose() * w.asDiagonal() * xd + ridge_diag;
  out.beta = std::move(beta);
  out.log_likelihood = log_likelihood(xd, y, out.beta, offset);
  return out;
}

// Likelihood-ratio interval for coefficient j by bisection on the profile.
std::pair<double, double> profile_interval(const MatrixXd& xd, const VectorXd& y, const IrlsOutcome& full,
                                           Index j, double se, const FitOptions& opts) {
  const boost::math::chi_squared chi1(1.0);
  const double cutoff = boost::math::quantile(chi1, opts.confidence);
  const double ll_max = full.log_likelihood;
  const Index p = xd.cols();

  MatrixXd reduced(xd.rows(), p - 1);
  Index c = 0;
  for (Index k = 0; k < p; ++k) {
    if (k != j) reduced.col(c++) = xd.col(k);
  }
  VectorXd start(p - 1);
  c = 0;
  for (Index k = 0; k < p; ++k) {
    if (k != j) start(c++) = full.beta(k);
  }
  FitOptions inner = opts;
  inner.ridge = 0.0;
  const bool has_intercept = j != 0;

  auto deviance_gap = [&](double value) {
    const VectorXd offset = xd.col(j) * value;
    const auto fit = irls(reduced, y, offset, start, inner, has_intercept);
    return 2.0 * (ll_max - fit.log_likelihood) - cutoff;
  };

  const double estimate = full.beta(j);
  auto search = [&](double direction) -> double {
    double inside = estimate;
    double step = std::max(se, 1e-8);
    double outside = estimate + direction * step;
    int expansions = 0;
    while (deviance_gap(outside) < 0.0) {
      inside = outside;
      step *= 2.0;
      outside = estimate + direction * step;
      if (++expansions > 60) return std::numeric_limits<double>::quiet_NaN();
    }
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (inside + outside);
      if (deviance_gap(mid) < 0.0) {
        inside = mid;
      } else {
        outside = mid;
      }
      if (std::fabs(outside - inside) <= 1e-10 * std::max(1.0, std::fabs(estimate))) break;
    }
    return 0.5 * (inside + outside);
  };
  return {search(-1.0), search(1.0)};
}

}  // namespace

double LogisticModel::linear_predictor(std::span<const double> x) const {
  if (x.size() != predictor_names.size()) {
    fail(Errc::DimensionMismatch, "expected " + std::to_string(predictor_names.size()) + " predictors, got " +
                                      std::to_string(x.size()));
  }
  double eta = coefficients.at(0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    double v = x[j];
    if (standardization) v = (v - standardization->center[j]) / standardization->scale[j];
    eta += coefficients[j + 1] * v;
  }
  return eta;
}

FitResult fit_logistic(const MatrixXd& x, std::span<const int> y, std::vector<std::string> predictor_names,
                       const FitOptions& opts) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (static_cast<std::size_t>(p) != predictor_names.size()) {
    fail(Errc::DimensionMismatch, "predictor names do not match design columns");
  }
  if (static_cast<std::size_t>(n) != y.size()) fail(Errc::DimensionMismatch, "labels do not match design rows");
  if (n < p + 2) fail(Errc::TooFewSamples, "need n >= p + 2 observations");
  if (!x.allFinite()) fail(Errc::InvalidArgument, "design contains non-finite values");
  std::size_t positives = 0;
  for (int label : y) {
    if (label != 0 && label != 1) fail(Errc::InvalidArgument, "labels must be 0 or 1");
    positives += static_cast<std::size_t>(label);
  }
  if (positives == 0 || positives == static_cast<std::size_t>(n)) {
    fail(Errc::OneClassOnly, "labels contain a single class");
  }

  MatrixXd xd(n, p + 1);
  xd.col(0).setOnes();
  xd.rightCols(p) = x;

  const Eigen::ColPivHouseholderQR<MatrixXd> qr(xd);
  if (qr.rank() < p + 1) {
    fail(Errc::SingularInformation, "design matrix is rank deficient (constant or collinear predictor)");
  }

  FitResult result;
  LogisticModel& model = result.model;
  model.predictor_names = std::move(predictor_names);
  model.ridge = opts.ridge;
  if (opts.standardize && p > 0) {
    Standardization st;
    for (Index j = 0; j < p; ++j) {
      const double m = x.col(j).mean();
      const double sd = std::sqrt((x.col(j).array() - m).square().sum() / static_cast<double>(n - 1));
      st.center.push_back(m);
      st.scale.push_back(sd);
      xd.col(j + 1) = (x.col(j).array() - m) / sd;
    }
    model.standardization = std::move(st);
  }

  VectorXd yv(n);
  for (Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];
  const VectorXd zero_offset = VectorXd::Zero(n);
  const auto fit = irls(xd, yv, zero_offset, VectorXd::Zero(p + 1), opts, true);

  model.coefficients.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
  model.converged = fit.converged;
  model.separation = fit.separation;
  model.iterations = fit.iterations;
  model.log_likelihood = fit.log_likelihood;
  model.n = static_cast<std::size_t>(n);

  const Eigen::LDLT<MatrixXd> ldlt(fit.information);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    model.covariance = ldlt.solve(MatrixXd::Identity(p + 1, p + 1));
    model.covariance = 0.5 * (model.covariance + model.covariance.transpose());
  } else {
    model.covariance = MatrixXd::Constant(p + 1, p + 1, std::numeric_limits<double>::infinity());
  }

  FitReport& report = result.report;
  report.n = static_cast<std::size_t>(n);
  if (fit.separation) report.warnings.push_back("SeparationDetected: coefficients diverge; estimates are not MLEs");
  if (!fit.converged && !fit.separation) {
    report.warnings.push_back("IRLS did not converge in " + std::to_string(opts.max_iterations) + " iterations");
  }
  const boost::math::normal standard;
  const double zcrit = boost::math::quantile(standard, 0.5 + 0.5 * opts.confidence);
  for (Index j = 0; j <= p; ++j) {
    CoefficientReport c;
    c.name = j == 0 ? "(intercept)" : model.predictor_names[static_cast<std::size_t>(j - 1)];
    c.estimate = fit.beta(j);
    const double var = model.covariance(j, j);
    c.standard_error = var >= 0.0 ? std::sqrt(var) : std::numeric_limits<double>::quiet_NaN();
    c.ci_low = c.estimate - zcrit * c.standard_error;
    c.ci_high = c.estimate + zcrit * c.standard_error;
    c.z = c.estimate / c.standard_error;
    c.p_value = std::isfinite(c.z) ? std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(standard, std::fabs(c.z))))
                                   : std::numeric_limits<double>::quiet_NaN();
    if (opts.profile_ci && fit.converged && !fit.separation && opts.ridge == 0.0 && std::isfinite(c.standard_error)) {
      const auto [lo, hi] = profile_interval(xd, yv, fit, j, c.standard_error, opts);
      if (std::isfinite(lo)) c.profile_low = lo;
      if (std::isfinite(hi)) c.profile_high = hi;
    }
    report.coefficients.push_back(std::move(c));
  }
  report.fitted.resize(static_cast<std::size_t>(n));
  const VectorXd eta = xd * fit.beta;
  for (Index i = 0; i < n; ++i) report.fitted[static_cast<std::size_t>(i)] = logistic(eta(i));
  std::vector<int> labels(y.begin(), y.end());
  report.tjur_r2 = tjur_r2(report.fitted, labels);
  return result;
}

double predict_probability(const LogisticModel& model, std::span<const double> x) {
  return logistic(model.linear_predictor(x));
}

double predict_probability(const LogisticModel& model, const std::map<std::string, double>& features) {
  std::vector<double> x;
  x.reserve(model.predictor_names.size());
  for (const auto& name : model.predictor_names) {
    const auto it = features.find(name);
    if (it == features.end()) fail(Errc::DimensionMismatch, "missing predictor column '" + name + "'");
    x.push_back(it->second);
  }
  return predict_probability(model, x);
}

double tjur_r2(std::span<const double> probabilities, std::span<const int> labels) {
  if (probabilities.size() != labels.size()) fail(Errc::DimensionMismatch, "probabilities and labels differ in length");
  double sum_pos = 0.0, sum_neg = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      sum_pos += probabilities[i];
      ++n_pos;
    } else if (labels[i] == 0) {
      sum_neg += probabilities[i];
      ++n_neg;
    } else {
      fail(Errc::InvalidArgument, "labels must be 0 or 1");
    }
  }
  if (n_pos == 0 || n_neg == 0) fail(Errc::OneClassOnly, "Tjur R2 needs both classes");
  return sum_pos / static_cast<double>(n_pos) - sum_neg / static_cast<double>(n_neg);
}

// ---------------------------------------------------------------------------
// Model file

namespace {

using json_io::json;
using json_io::number_from;
using json_io::number_or_null;

const json& require(const json& j, const std::string& key, const std::string& path) {
  return json_io::require(j, key, path, Errc::CorruptModelFile);
}

}  // namespace

std::string model_to_json(const LogisticModel& model) {
  json doc;
  doc["version"] = kModelVersion;
  doc["kind"] = "piw.logistic_model";
  doc["predictor_names"] = model.predictor_names;
  doc["coefficients"] = model.coefficients;
  json cov = json::array();
  for (Index i = 0; i < model.covariance.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < model.covariance.cols(); ++k) row.push_back(number_or_null(model.covariance(i, k)));
    cov.push_back(std::move(row));
  }
  doc["covariance"] = std::move(cov);
  doc["normalization"] = json_io::to_json(model.normalization);
  if (model.standardization) {
    doc["standardization"] = json{{"center", model.standardization->center}, {"scale", model.standardization->scale}};
  } else {
    doc["standardization"] = nullptr;
  }
  doc["fit_meta"] = json{{"converged", model.converged},
                         {"separation", model.separation},
                         {"iterations", model.iterations},
                         {"log_likelihood", model.log_likelihood},
                         {"n", model.n},
                         {"ridge", model.ridge}};
  return doc.dump(2) + "\n";
}

LogisticModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::CorruptModelFile, std::string("not valid JSON: ") + e.what());
  }
  try {
    const auto& version = require(doc, "version", "");
    if (!version.is_number_integer() || version.get<int>() != kModelVersion) {
      fail(Errc::CorruptModelFile, "unsupported model version " + version.dump() + " (expected " +
                                       std::to_string(kModelVersion) + ")");
    }
    LogisticModel model;
    model.predictor_names = require(doc, "predictor_names", "").get<std::vector<std::string>>();
    model.coefficients = require(doc, "coefficients", "").get<std::vector<double>>();
    if (model.coefficients.size() != model.predictor_names.size() + 1) {
      fail(Errc::CorruptModelFile, "field 'coefficients' must hold intercept plus one value per predictor");
    }
    const auto& cov = require(doc, "covariance", "");
    const auto p = static_cast<Index>(model.coefficients.size());
    if (!cov.is_array() || static_cast<Index>(cov.size()) != p) {
      fail(Errc::CorruptModelFile, "field 'covariance' has wrong shape");
    }
    model.covariance.resize(p, p);
    for (Index i = 0; i < p; ++i) {
      const auto& row = cov.at(static_cast<std::size_t>(i));
      if (!row.is_array() || static_cast<Index>(row.size()) != p) {
        fail(Errc::CorruptModelFile, "field 'covariance' has wrong shape");
      }
      for (Index k = 0; k < p; ++k) model.covariance(i, k) = number_from(row.at(static_cast<std::size_t>(k)), "covariance", Errc::CorruptModelFile);
    }
    model.normalization = json_io::normalization_from_json(require(doc, "normalization", ""), "normalization.",
                                                           Errc::CorruptModelFile);
    if (doc.contains("standardization") && !doc.at("standardization").is_null()) {
      const auto& st = doc.at("standardization");
      Standardization s;
      s.center = require(st, "center", "standardization.").get<std::vector<double>>();
      s.scale = require(st, "scale", "standardization.").get<std::vector<double>>();
      if (s.center.size() != model.predictor_names.size() || s.scale.size() != model.predictor_names.size()) {
        fail(Errc::CorruptModelFile, "field 'standardization' has wrong length");
      }
      model.standardization = std::move(s);
    }
    const auto& meta = require(doc, "fit_meta", "");
    model.converged = require(meta, "converged", "fit_meta.").get<bool>();
    model.separation = meta.value("separation", false);
    model.iterations = require(meta, "iterations", "fit_meta.").get<int>();
    model.log_likelihood = number_from(require(meta, "log_likelihood", "fit_meta."), "fit_meta.log_likelihood", Errc::CorruptModelFile);
    model.n = require(meta, "n", "fit_meta.").get<std::size_t>();
    model.ridge = meta.value("ridge", 0.0);
    return model;
  } catch (const json::exception& e) {
    fail(Errc::CorruptModelFile, std::string("malformed model: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptModelFile) throw;
    fail(Errc::CorruptModelFile, e.what());
  }
}

void save_model(const LogisticModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot write '" + path.string() + "'");
  out << model_to_json(model);
  if (!out) fail(Errc::Io, "write failed for '" + path.string() + "'");
}

LogisticModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace piw::wlmodel
