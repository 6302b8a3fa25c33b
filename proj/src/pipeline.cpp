#include "piw/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "piw/error.hpp"
#include "piw/json_io.hpp"

namespace piw::pipeline {

using json_io::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "" : (v > 0 ? "inf" : "-inf");
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

json opt_number(const std::optional<double>& v) { return v ? json_io::number_or_null(*v) : json(nullptr); }

std::optional<core::NormalizationFit> fit_axis(std::span<const core::DutyAgg> raw, core::AggNormalization mode) {
  if (mode == core::AggNormalization::none) return std::nullopt;
  std::vector<core::DutyAgg> positive;
  for (const auto& r : raw) {
    if (r.aggressiveness > 0.0) positive.push_back(r);
  }
  if (positive.empty()) return std::nullopt;
  if (mode == core::AggNormalization::exp_inverse) return core::fit_normalization(positive);
  // minmax only needs the range; the exponential fit is reported when it exists.
  try {
    return core::fit_normalization(positive);
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateFit) throw;
  }
  core::NormalizationFit f;
  f.fitted_on = positive.size();
  f.agg_min = f.agg_max = positive.front().aggressiveness;
  for (const auto& r : positive) {
    f.agg_min = std::min(f.agg_min, r.aggressiveness);
    f.agg_max = std::max(f.agg_max, r.aggressiveness);
  }
  return f;
}

GroupSummary summarize(std::span<const double> x) {
  GroupSummary g;
  g.mean = stats::mean(x);
  g.sd = x.size() > 1 ? stats::stddev(x) : 0.0;
  const auto q = stats::quartiles(x);
  g.median = q.median;
  g.iqr = q.iqr();
  return g;
}

json summary_json(const GroupSummary& g) {
  return json{{"mean", g.mean}, {"sd", g.sd}, {"median", g.median}, {"iqr", g.iqr}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

wlmodel::ModelNormalization fit_normalizations(std::span<const core::DutyAgg> lon, std::span<const core::DutyAgg> lat,
                                               core::AggNormalization mode) {
  wlmodel::ModelNormalization n;
  n.mode = mode;
  n.lon = fit_axis(lon, mode);
  n.lat = fit_axis(lat, mode);
  return n;
}

table::MetricsTable compute_metrics(std::span<const TrialInput> inputs, const core::PIWConfig& cfg,
                                    const wlmodel::ModelNormalization* frozen, unsigned threads) {
  cfg.validate();
  const std::size_t n = inputs.size();
  std::vector<core::DutyAgg> lon(n), lat(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < n; i += step) {
      try {
        lon[i] = core::raw_axis_metrics(inputs[i].trace, Axis::lon, cfg);
        lat[i] = core::raw_axis_metrics(inputs[i].trace, Axis::lat, cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  table::MetricsTable t;
  if (frozen) {
    t.normalization = *frozen;
  } else {
    t.normalization = fit_normalizations(lon, lat, cfg.agg_normalization);
  }
  core::PIWConfig effective = cfg;
  effective.agg_normalization = t.normalization.mode;
  for (std::size_t i = 0; i < n; ++i) {
    for (const Axis axis : {Axis::lon, Axis::lat}) {
      table::MetricsRow row;
      row.source = inputs[i].source;
      row.subject = inputs[i].subject;
      row.trial = inputs[i].trial;
      row.condition = inputs[i].condition;
      row.axis = axis;
      row.metrics = core::finalize_metrics(axis == Axis::lon ? lon[i] : lat[i], t.normalization.fit_for(axis), effective);
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

std::vector<TrialInput> batch_inputs(std::vector<sim::BatchTrial> batch) {
  std::vector<TrialInput> out;
  out.reserve(batch.size());
  for (auto& b : batch) {
    TrialInput in;
    in.condition = std::string(sim::workload_name(b.workload));
    in.source = in.condition + "_" + std::to_string(b.replicate + 1);
    in.subject = "sim";
    in.trial = static_cast<int>(b.replicate + 1);
    in.trace = std::move(b.trace);
    out.push_back(std::move(in));
  }
  return out;
}

// --- compare ------------------------------------------------------------

Pairing parse_pairing(std::string_view name) {
  if (name == "trial") return Pairing::trial;
  if (name == "subject_mean" || name == "subject") return Pairing::subject_mean;
  fail(Errc::InvalidArgument, "unknown pairing '" + std::string(name) + "'");
}

std::string_view pairing_name(Pairing p) { return p == Pairing::trial ? "trial" : "subject_mean"; }

const VariableComparison& CompareReport::find(std::string_view variable) const {
  for (const auto& v : variables) {
    if (v.variable == variable) return v;
  }
  fail(Errc::InvalidArgument, "no comparison for '" + std::string(variable) + "'");
}

std::vector<stats::PairedSample> paired_samples(std::span<const table::TrialFeatures> trials,
                                                const CompareOptions& opts) {
  for (const auto& v : opts.variables) {
    if (!core::is_feature_name(v)) fail(Errc::InvalidArgument, "unknown variable '" + v + "'");
  }
  // subject -> condition label -> trials (by index)
  std::map<std::string, std::array<std::vector<const table::TrialFeatures*>, 2>> by_subject;
  std::vector<std::string> subject_order;
  for (const auto& t : trials) {
    auto [it, inserted] = by_subject.try_emplace(t.subject);
    if (inserted) subject_order.push_back(t.subject);
    it->second[table::condition_label(t.condition)].push_back(&t);
  }
  std::vector<std::pair<const table::TrialFeatures*, const table::TrialFeatures*>> pairs;
  std::vector<std::pair<std::vector<const table::TrialFeatures*>, std::vector<const table::TrialFeatures*>>> groups;
  for (const auto& subject : subject_order) {
    auto& [low, high] = by_subject[subject];
    if (low.empty() || high.empty()) {
      fail(Errc::UnpairableRows, "subject '" + subject + "' lacks one condition");
    }
    if (opts.pairing == Pairing::trial) {
      if (low.size() != high.size()) {
        fail(Errc::UnpairableRows, "subject '" + subject + "' has " + std::to_string(low.size()) + " low and " +
                                       std::to_string(high.size()) + " high trials");
      }
      auto by_trial = [](const table::TrialFeatures* a, const table::TrialFeatures* b) { return a->trial < b->trial; };
      std::stable_sort(low.begin(), low.end(), by_trial);
      std::stable_sort(high.begin(), high.end(), by_trial);
      for (std::size_t k = 0; k < low.size(); ++k) pairs.emplace_back(low[k], high[k]);
    } else {
      groups.emplace_back(low, high);
    }
  }

  std::vector<stats::PairedSample> out;
  for (const auto& v : opts.variables) {
    stats::PairedSample s;
    s.label = v;
    if (opts.pairing == Pairing::trial) {
      for (const auto& [lo, hi] : pairs) {
        s.low.push_back(core::feature_value(lo->lon, lo->lat, v));
        s.high.push_back(core::feature_value(hi->lon, hi->lat, v));
      }
    } else {
      auto avg = [&](const std::vector<const table::TrialFeatures*>& g) {
        double sum = 0.0;
        for (const auto* t : g) sum += core::feature_value(t->lon, t->lat, v);
        return sum / static_cast<double>(g.size());
      };
      for (const auto& [lo, hi] : groups) {
        s.low.push_back(avg(lo));
        s.high.push_back(avg(hi));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

VariableComparison compare_one(const stats::PairedSample& s, const CompareOptions& opts) {
  s.validate();
  VariableComparison v;
  v.variable = s.label;
  v.n_pairs = s.low.size();
  v.low = summarize(s.low);
  v.high = summarize(s.high);
  const stats::TestOptions topts{opts.alpha, opts.family_size};

  std::vector<double> diff(s.low.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = s.high[i] - s.low[i];
  if (std::all_of(diff.begin(), diff.end(), [](double d) { return d == 0.0; })) {
    v.test.method = "none (identical conditions)";
    v.test.p_value = 1.0;
    v.test.alpha_adjusted = stats::bonferroni_alpha(opts.alpha, opts.family_size);
    v.test.n_used = 0;
    return v;
  }
  if (diff.size() >= 3 && diff.size() <= 5000) {
    try {
      v.normality = stats::shapiro_wilk(diff);
      v.normal = v.normality->p_value >= opts.normality_alpha;
    } catch (const Error& e) {
      if (e.code() != Errc::ZeroVariance) throw;
    }
  }
  v.test = v.normal ? stats::paired_t_test(s, topts) : stats::wilcoxon_signed_rank(s, topts);
  return v;
}

void add_diagnostics(CompareReport& r, std::span<const table::TrialFeatures> trials, const CompareOptions& opts) {
  auto& d = r.diagnostics;
  std::vector<stats::NamedColumn> design{{"lat_piw1", {}}, {"lon_piw1", {}}};
  std::vector<stats::TrialPoint> lon_trend, lat_trend;
  for (const auto& t : trials) {
    design[0].values.push_back(t.lat.piw1);
    design[1].values.push_back(t.lon.piw1);
    lon_trend.push_back({static_cast<double>(t.trial), t.lon.piw1});
    lat_trend.push_back({static_cast<double>(t.trial), t.lat.piw1});
  }
  auto guarded = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      d.warnings.push_back(std::string(what) + ": " + e.what());
    }
  };
  guarded("correlation", [&] { d.correlation = stats::correlation_matrix(design); });
  guarded("vif", [&] { d.vif = stats::vif(design); });
  guarded("lon trial trend", [&] { d.lon_trial_trend = stats::trial_order_effect(lon_trend); });
  guarded("lat trial trend", [&] { d.lat_trial_trend = stats::trial_order_effect(lat_trend); });
  for (const auto& v : opts.variables) {
    std::vector<double> values;
    for (const auto& t : trials) values.push_back(core::feature_value(t.lon, t.lat, v));
    guarded("outliers", [&] {
      const auto flags = stats::flag_outliers(values);
      d.outliers.emplace_back(v, std::count_if(flags.begin(), flags.end(), [](const auto& f) { return f.is_outlier; }));
      d.extremes.emplace_back(v, std::count_if(flags.begin(), flags.end(), [](const auto& f) { return f.is_extreme; }));
    });
  }
}

}  // namespace

CompareReport compare_conditions(const table::MetricsTable& t, const CompareOptions& opts) {
  const auto trials = table::pivot(t);
  CompareReport r;
  r.pairing = opts.pairing;
  r.alpha_adjusted = stats::bonferroni_alpha(opts.alpha, opts.family_size);
  for (const auto& s : paired_samples(trials, opts)) r.variables.push_back(compare_one(s, opts));
  add_diagnostics(r, trials, opts);
  return r;
}

void write_compare(std::ostream& out, const CompareReport& r, table::Format f) {
  if (f == table::Format::csv) {
    out << "variable,n_pairs,low_mean,low_sd,low_median,low_iqr,high_mean,high_sd,high_median,high_iqr,"
           "sw_w,sw_p,normal,method,statistic,df,p_value,effect_size,effect_kind,alpha_adjusted,significant\n";
    for (const auto& v : r.variables) {
      out << v.variable << ',' << v.n_pairs << ',' << fmt(v.low.mean) << ',' << fmt(v.low.sd) << ','
          << fmt(v.low.median) << ',' << fmt(v.low.iqr) << ',' << fmt(v.high.mean) << ',' << fmt(v.high.sd) << ','
          << fmt(v.high.median) << ',' << fmt(v.high.iqr) << ',' << (v.normality ? fmt(v.normality->w) : "") << ','
          << (v.normality ? fmt(v.normality->p_value) : "") << ',' << (v.normal ? 1 : 0) << ','
          << csv_field(v.test.method) << ',' << fmt(v.test.statistic) << ',' << fmt(v.test.df) << ','
          << fmt(v.test.p_value) << ',' << fmt(v.test.effect_size) << ','
          << stats::effect_kind_name(v.test.effect_kind) << ',' << fmt(v.test.alpha_adjusted) << ','
          << (v.test.significant() ? 1 : 0) << '\n';
    }
    return;
  }
  json doc;
  doc["kind"] = "piw.compare";
  doc["version"] = 1;
  doc["pairing"] = pairing_name(r.pairing);
  doc["alpha_adjusted"] = r.alpha_adjusted;
  json vars = json::array();
  for (const auto& v : r.variables) {
    json j;
    j["variable"] = v.variable;
    j["n_pairs"] = v.n_pairs;
    j["low"] = summary_json(v.low);
    j["high"] = summary_json(v.high);
    j["normality"] = v.normality ? json{{"w", v.normality->w}, {"p_value", v.normality->p_value}} : json(nullptr);
    j["normal"] = v.normal;
    j["test"] = {{"method", v.test.method},
                 {"statistic", json_io::number_or_null(v.test.statistic)},
                 {"df", v.test.df},
                 {"w_plus", v.test.w_plus},
                 {"n_used", v.test.n_used},
                 {"exact", v.test.exact},
                 {"p_value", v.test.p_value},
                 {"effect_size", json_io::number_or_null(v.test.effect_size)},
                 {"effect_kind", stats::effect_kind_name(v.test.effect_kind)},
                 {"alpha_adjusted", v.test.alpha_adjusted},
                 {"significant", v.test.significant()}};
    vars.push_back(std::move(j));
  }
  doc["variables"] = std::move(vars);

  const auto& d = r.diagnostics;
  json diag;
  if (d.correlation) {
    json m = json::array();
    for (Eigen::Index i = 0; i < d.correlation->r.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < d.correlation->r.cols(); ++k) row.push_back(d.correlation->r(i, k));
      m.push_back(std::move(row));
    }
    diag["correlation"] = {{"names", d.correlation->names}, {"r", std::move(m)}};
  } else {
    diag["correlation"] = nullptr;
  }
  if (d.vif) {
    json v = json::object();
    for (std::size_t i = 0; i < d.vif->names.size(); ++i) v[d.vif->names[i]] = json_io::number_or_null(d.vif->vif[i]);
    diag["vif"] = {{"values", std::move(v)}, {"singular", d.vif->singular}};
  } else {
    diag["vif"] = nullptr;
  }
  auto trend = [](const std::optional<stats::TrendResult>& t) {
    if (!t) return json(nullptr);
    return json{{"slope", t->slope},
                {"intercept", t->intercept},
                {"t_statistic", json_io::number_or_null(t->t_statistic)},
                {"p_value", t->p_value}};
  };
  diag["trial_trend"] = {{"lon_piw1", trend(d.lon_trial_trend)}, {"lat_piw1", trend(d.lat_trial_trend)}};
  json outl = json::object();
  for (std::size_t i = 0; i < d.outliers.size(); ++i) {
    outl[d.outliers[i].first] = {{"outliers", d.outliers[i].second}, {"extremes", d.extremes[i].second}};
  }
  diag["outliers"] = std::move(outl);
  diag["warnings"] = d.warnings;
  doc["diagnostics"] = std::move(diag);
  out << doc.dump(2) << '\n';
}

// --- train / predict ----------------------------------------------------

wlmodel::FitResult train_model(const table::MetricsTable& t, const TrainOptions& opts) {
  for (const auto& p : opts.predictors) {
    if (!core::is_feature_name(p)) fail(Errc::InvalidArgument, "unknown predictor '" + p + "'");
  }
  const auto trials = table::pivot(t);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(trials.size()), static_cast<Eigen::Index>(opts.predictors.size()));
  std::vector<int> y(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    for (std::size_t k = 0; k < opts.predictors.size(); ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          core::feature_value(trials[i].lon, trials[i].lat, opts.predictors[k]);
    }
    y[i] = table::condition_label(trials[i].condition);
  }
  auto result = wlmodel::fit_logistic(x, y, opts.predictors, opts.fit);
  result.model.normalization = t.normalization;
  return result;
}

void write_fit_report(std::ostream& out, const wlmodel::FitResult& r, table::Format f) {
  const auto& rep = r.report;
  if (f == table::Format::csv) {
    out << "name,estimate,standard_error,ci_low,ci_high,z,p_value,profile_low,profile_high\n";
    for (const auto& c : rep.coefficients) {
      out << c.name << ',' << fmt(c.estimate) << ',' << fmt(c.standard_error) << ',' << fmt(c.ci_low) << ','
          << fmt(c.ci_high) << ',' << fmt(c.z) << ',' << fmt(c.p_value) << ','
          << (c.profile_low ? fmt(*c.profile_low) : "") << ',' << (c.profile_high ? fmt(*c.profile_high) : "")
          << '\n';
    }
    return;
  }
  json doc;
  doc["kind"] = "piw.fit_report";
  doc["version"] = 1;
  doc["n"] = rep.n;
  doc["tjur_r2"] = rep.tjur_r2;
  doc["converged"] = r.model.converged;
  doc["separation"] = r.model.separation;
  doc["iterations"] = r.model.iterations;
  doc["log_likelihood"] = r.model.log_likelihood;
  json coefs = json::array();
  for (const auto& c : rep.coefficients) {
    coefs.push_back({{"name", c.name},
                     {"estimate", c.estimate},
                     {"standard_error", json_io::number_or_null(c.standard_error)},
                     {"ci_low", json_io::number_or_null(c.ci_low)},
                     {"ci_high", json_io::number_or_null(c.ci_high)},
                     {"z", json_io::number_or_null(c.z)},
                     {"p_value", json_io::number_or_null(c.p_value)},
                     {"profile_low", opt_number(c.profile_low)},
                     {"profile_high", opt_number(c.profile_high)}});
  }
  doc["coefficients"] = std::move(coefs);
  doc["fitted"] = rep.fitted;
  doc["warnings"] = rep.warnings;
  out << doc.dump(2) << '\n';
}

void write_fit_summary(std::ostream& out, const wlmodel::FitResult& r) {
  const auto& rep = r.report;
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "logistic regression, n = " << rep.n << ", iterations = " << r.model.iterations
     << (r.model.converged ? "" : " (not converged)") << '\n';
  os << "term                  estimate     std.err   wald.low  wald.high   p.value\n";
  for (const auto& c : rep.coefficients) {
    os.width(20);
    os << std::left << c.name << std::right;
    for (double v : {c.estimate, c.standard_error, c.ci_low, c.ci_high, c.p_value}) {
      os.width(11);
      os << v;
    }
    if (c.profile_low && c.profile_high) os << "  profile [" << *c.profile_low << ", " << *c.profile_high << "]";
    os << '\n';
  }
  os << "Tjur R2 = " << rep.tjur_r2 << '\n';
  for (const auto& w : rep.warnings) os << "warning: " << w << '\n';
  out << os.str();
}

table::MetricsTable predict(const table::MetricsTable& t, const wlmodel::LogisticModel& model,
                            const core::PIWConfig& cfg) {
  core::PIWConfig effective = cfg;
  effective.agg_normalization = model.normalization.mode;
  table::MetricsTable out = t;
  out.normalization = model.normalization;
  for (auto& row : out.rows) {
    row.metrics = core::finalize_metrics({row.metrics.duty_cycle, row.metrics.aggressiveness},
                                         model.normalization.fit_for(row.axis), effective);
  }
  const auto trials = table::pivot(out);
  std::map<std::tuple<std::string, std::string, int, std::string>, double> p;
  for (const auto& tr : trials) {
    std::map<std::string, double> features;
    for (const char* axis : {"lon", "lat"}) {
      for (const char* metric : {"duty_cycle", "aggressiveness", "agg_normalized", "piw1"}) {
        const std::string name = std::string(axis) + "_" + metric;
        features[name] = core::feature_value(tr.lon, tr.lat, name);
      }
    }
    p[{tr.source, tr.subject, tr.trial, tr.condition}] = wlmodel::predict_probability(model, features);
  }
  for (auto& row : out.rows) row.p_high = p.at({row.source, row.subject, row.trial, row.condition});
  return out;
}

// --- plot data ----------------------------------------------------------

BoxStats box_stats(std::span<const double> values) {
  BoxStats b;
  b.n = values.size();
  if (values.empty()) {
    b.q1 = b.median = b.q3 = b.whisker_low = b.whisker_high = kNaN;
    return b;
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  b.q1 = stats::quantile_sorted(sorted, 0.25);
  b.median = stats::quantile_sorted(sorted, 0.5);
  b.q3 = stats::quantile_sorted(sorted, 0.75);
  const double lo = b.q1 - 1.5 * (b.q3 - b.q1);
  const double hi = b.q3 + 1.5 * (b.q3 - b.q1);
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  for (double v : sorted) {
    if (v < lo || v > hi) {
      b.outliers.push_back(v);
    } else {
      b.whisker_low = std::min(b.whisker_low, v);
      b.whisker_high = std::max(b.whisker_high, v);
    }
  }
  return b;
}

PlotData plot_data(const table::MetricsTable& t) {
  PlotData p;
  std::vector<std::string> conditions = {"low", "high"};
  auto canonical = [](const std::string& c) -> std::string {
    try {
      return table::condition_label(c) ? "high" : "low";
    } catch (const Error&) {
      return c;
    }
  };
  for (const auto& r : t.rows) {
    p.scatter.push_back({r.source, r.condition, r.axis, r.metrics.aggressiveness, r.metrics.duty_cycle});
    const auto c = canonical(r.condition);
    if (std::find(conditions.begin(), conditions.end(), c) == conditions.end()) conditions.push_back(c);
  }
  for (const Axis axis : {Axis::lon, Axis::lat}) {
    for (const auto& c : conditions) {
      std::vector<double> values;
      for (const auto& r : t.rows) {
        if (r.axis == axis && canonical(r.condition) == c) values.push_back(r.metrics.piw1);
      }
      auto b = box_stats(values);
      b.axis = axis;
      b.condition = c;
      p.boxes.push_back(std::move(b));
    }
  }
  return p;
}

void write_plot_data(std::ostream& out, const PlotData& p, table::Format f) {
  if (f == table::Format::csv) {
    out << "section,source,condition,axis,aggressiveness,duty_cycle,n,q1,median,q3,whisker_low,whisker_high,outliers\n";
    for (const auto& s : p.scatter) {
      out << "scatter," << csv_field(s.source) << ',' << csv_field(s.condition) << ',' << axis_name(s.axis) << ','
          << fmt(s.aggressiveness) << ',' << fmt(s.duty_cycle) << ",,,,,,,\n";
    }
    for (const auto& b : p.boxes) {
      std::string outliers;
      for (std::size_t i = 0; i < b.outliers.size(); ++i) outliers += (i ? ";" : "") + fmt(b.outliers[i]);
      out << "box,," << csv_field(b.condition) << ',' << axis_name(b.axis) << ",,," << b.n << ',' << fmt(b.q1) << ','
          << fmt(b.median) << ',' << fmt(b.q3) << ',' << fmt(b.whisker_low) << ',' << fmt(b.whisker_high) << ','
          << outliers << '\n';
    }
    return;
  }
  json doc;
  doc["kind"] = "piw.plotdata";
  doc["version"] = 1;
  json scatter = json::array();
  for (const auto& s : p.scatter) {
    scatter.push_back({{"source", s.source},
                       {"condition", s.condition},
                       {"axis", axis_name(s.axis)},
                       {"aggressiveness", s.aggressiveness},
                       {"duty_cycle", s.duty_cycle}});
  }
  json boxes = json::array();
  for (const auto& b : p.boxes) {
    boxes.push_back({{"axis", axis_name(b.axis)},
                     {"condition", b.condition},
                     {"metric", "piw1"},
                     {"n", b.n},
                     {"q1", json_io::number_or_null(b.q1)},
                     {"median", json_io::number_or_null(b.median)},
                     {"q3", json_io::number_or_null(b.q3)},
                     {"whisker_low", json_io::number_or_null(b.whisker_low)},
                     {"whisker_high", json_io::number_or_null(b.whisker_high)},
                     {"outliers", b.outliers}});
  }
  doc["scatter"] = std::move(scatter);
  doc["boxes"] = std::move(boxes);
  out << doc.dump(2) << '\n';
}

}  // namespace piw::pipeline
