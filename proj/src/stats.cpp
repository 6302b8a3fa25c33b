#include "piw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "piw/error.hpp"

namespace piw::stats {

namespace {

double normal_upper(double z) {
  static const boost::math::normal standard;
  return boost::math::cdf(boost::math::complement(standard, z));
}

double normal_quantile(double p) {
  static const boost::math::normal standard;
  return boost::math::quantile(standard, p);
}

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) fail(Errc::InvalidArgument, std::string(what) + " contains a non-finite value");
  }
}

std::vector<double> differences(const PairedSample& s) {
  s.validate();
  std::vector<double> d(s.low.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = s.high[i] - s.low[i];
  return d;
}

}  // namespace

std::string_view effect_kind_name(EffectKind kind) {
  return kind == EffectKind::cohens_d ? "cohens_d" : "rank_biserial_r";
}

void PairedSample::validate() const {
  if (low.size() != high.size()) {
    fail(Errc::UnpairableRows, "paired sample '" + label + "' has unequal lengths");
  }
  if (low.size() < 2) fail(Errc::TooFewSamples, "paired sample '" + label + "' needs n >= 2");
  require_finite(low, "low");
  require_finite(high, "high");
}

double bonferroni_alpha(double alpha, std::size_t family_size) {
  if (family_size == 0) fail(Errc::InvalidArgument, "family size must be >= 1");
  return alpha / static_cast<double>(family_size);
}

double mean(std::span<const double> x) {
  if (x.empty()) fail(Errc::TooFewSamples, "mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
  if (x.size() < 2) fail(Errc::TooFewSamples, "standard deviation needs n >= 2");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

// ---------------------------------------------------------------------------
// Shapiro-Wilk W with Royston's (1995) coefficient and p-value approximations.

namespace {

double poly(const double* cc, int nord, double x) {
  double ret = cc[0];
  if (nord > 1) {
    double p = x * cc[nord - 1];
    for (int j = nord - 2; j > 0; --j) p = (p + cc[j]) * x;
    ret += p;
  }
  return ret;
}

}  // namespace

ShapiroWilkResult shapiro_wilk(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 3) fail(Errc::TooFewSamples, "Shapiro-Wilk needs n >= 3");
  if (n > 5000) fail(Errc::InvalidArgument, "Shapiro-Wilk approximation is valid for n <= 5000");
  require_finite(x, "sample");

  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double range = sorted.back() - sorted.front();
  if (!(range > 0.0)) fail(Errc::ZeroVariance, "all values are identical");

  static constexpr double c1[6] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static constexpr double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[4] = {0.5440, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[4] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[4] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[3] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[2] = {-2.273, 0.459};

  const double an = static_cast<double>(n);
  const std::size_t half = n / 2;
  std::vector<double> a(half);  // a[0] pairs the extremes

  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, 6, rsn) - m[0] / ssumm2;

    std::size_t first_scaled = 1;
    double fac = 0.0;
    if (n > 5) {
      first_scaled = 2;
      const double a2 = -m[1] / ssumm2 + poly(c2, 6, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
                      (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
  }

  // Scale by the range for conditioning; W is scale invariant.
  double xbar = 0.0;
  for (double v : sorted) xbar += v / range;
  xbar /= an;
  double ssq = 0.0;
  for (double v : sorted) ssq += (v / range - xbar) * (v / range - xbar);
  double num = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    num += a[i] * (sorted[n - 1 - i] - sorted[i]) / range;
  }
  double w = num * num / ssq;
  w = std::min(w, 1.0);

  ShapiroWilkResult result;
  result.w = w;
  const double w1 = 1.0 - w;

  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;   // 6 / pi
    constexpr double stqr = 1.04719755119660;  // asin(sqrt(3/4))
    result.p_value = std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr));
    return result;
  }
  if (w1 <= 0.0) {
    result.p_value = 1.0;
    return result;
  }

  double y = std::log(w1);
  double mean_z = 0.0, sd_z = 1.0;
  if (n <= 11) {
    const double gamma = poly(g, 2, an);
    if (y >= gamma) {
      result.p_value = 1e-99;
      return result;
    }
    y = -std::log(gamma - y);
    mean_z = poly(c3, 4, an);
    sd_z = std::exp(poly(c4, 4, an));
  } else {
    const double xx = std::log(an);
    mean_z = poly(c5, 4, xx);
    sd_z = std::exp(poly(c6, 3, xx));
  }
  result.p_value = std::clamp(normal_upper((y - mean_z) / sd_z), 0.0, 1.0);
  return result;
}

// ---------------------------------------------------------------------------

TestResult paired_t_test(const PairedSample& s, const TestOptions& opts) {
  const auto d = differences(s);
  const double md = mean(d);
  const double sd = stddev(d);
  if (!(sd > 0.0)) fail(Errc::ZeroVariance, "paired differences have zero variance");
  const double n = static_cast<double>(d.size());

  TestResult r;
  r.method = "paired_t";
  r.df = n - 1.0;
  r.statistic = md / (sd / std::sqrt(n));
  const boost::math::students_t dist(r.df);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.statistic))));
  r.effect_size = md / sd;
  r.effect_kind = EffectKind::cohens_d;
  r.alpha_adjusted = bonferroni_alpha(opts.alpha, opts.family_size);
  r.n_used = d.size();
  return r;
}

namespace {

// Mid-ranks of |d| (all nonzero); also returns sum of (t^3 - t) over tie groups.
std::vector<double> abs_midranks(const std::vector<double>& d, double& tie_term) {
  const std::size_t m = d.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return std::fabs(d[i]) < std::fabs(d[j]); });
  std::vector<double> ranks(m);
  tie_term = 0.0;
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j + 1 < m && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
    const double rank = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    const auto t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  return ranks;
}

// Exact two-sided p: distribution of the positive-rank sum over all 2^m sign
// assignments, built by convolution over doubled (integral) ranks.
double exact_signed_rank_p(const std::vector<double>& ranks, double w_plus) {
  std::vector<std::int64_t> doubled(ranks.size());
  std::int64_t total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    doubled[i] = std::llround(2.0 * ranks[i]);
    total += doubled[i];
  }
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  std::int64_t reach = 0;
  for (auto r : doubled) {
    for (std::int64_t s = reach; s >= 0; --s) {
      if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
    }
    reach += r;
  }
  const std::int64_t observed = std::llround(2.0 * w_plus);
  const std::int64_t dev_obs = std::llabs(2 * observed - total);
  double tail = 0.0;
  for (std::int64_t s = 0; s <= total; ++s) {
    if (std::llabs(2 * s - total) >= dev_obs) tail += counts[static_cast<std::size_t>(s)];
  }
  return std::min(1.0, tail / std::ldexp(1.0, static_cast<int>(ranks.size())));
}

}  // namespace

TestResult wilcoxon_signed_rank(const PairedSample& s, const TestOptions& opts, WilcoxonMethod method) {
  const auto all = differences(s);
  std::vector<double> d;
  for (double v : all) {
    if (v != 0.0) d.push_back(v);
  }
  if (d.empty()) fail(Errc::AllZeroDifferences, "all paired differences are zero");
  if (d.size() < 2) fail(Errc::TooFewSamples, "Wilcoxon needs >= 2 nonzero differences");

  double tie_term = 0.0;
  const auto ranks = abs_midranks(d, tie_term);
  const double m = static_cast<double>(d.size());
  double w_plus = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0) w_plus += ranks[i];
  }
  const double mu = m * (m + 1.0) / 4.0;
  const double var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0 - tie_term / 48.0;
  const double dev = w_plus - mu;
  const double correction = dev > 0.0 ? 0.5 : (dev < 0.0 ? -0.5 : 0.0);
  const double z = var > 0.0 ? (dev - correction) / std::sqrt(var) : 0.0;

  TestResult r;
  r.w_plus = w_plus;
  r.statistic = z;
  r.n_used = d.size();
  r.effect_kind = EffectKind::rank_biserial_r;
  r.effect_size = std::fabs(z) / std::sqrt(static_cast<double>(all.size()));
  r.alpha_adjusted = bonferroni_alpha(opts.alpha, opts.family_size);

  const bool use_exact = method == WilcoxonMethod::exact ||
                         (method == WilcoxonMethod::automatic && d.size() <= 20);
  if (use_exact) {
    if (d.size() > 40) fail(Errc::InvalidArgument, "exact Wilcoxon limited to m <= 40");
    r.exact = true;
    r.method = "wilcoxon_exact";
    r.p_value = exact_signed_rank_p(ranks, w_plus);
  } else {
    r.method = "wilcoxon_normal";
    r.p_value = var > 0.0 ? std::min(1.0, 2.0 * normal_upper(std::fabs(z))) : 1.0;
  }
  return r;
}

// ---------------------------------------------------------------------------

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) fail(Errc::TooFewSamples, "quantile of empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Quartiles quartiles(std::span<const double> x) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  return {quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.5), quantile_sorted(sorted, 0.75)};
}

std::vector<OutlierFlag> flag_outliers(std::span<const double> x) {
  if (x.size() < 4) fail(Errc::TooFewSamples, "outlier flags need n >= 4");
  require_finite(x, "sample");
  const auto q = quartiles(x);
  const double iqr = q.iqr();
  std::vector<OutlierFlag> flags;
  flags.reserve(x.size());
  for (double v : x) {
    OutlierFlag f;
    f.value = v;
    f.is_outlier = v < q.q1 - 1.5 * iqr || v > q.q3 + 1.5 * iqr;
    f.is_extreme = v < q.q1 - 3.0 * iqr || v > q.q3 + 3.0 * iqr;
    flags.push_back(f);
  }
  return flags;
}

// ---------------------------------------------------------------------------

namespace {

void check_columns(std::span<const NamedColumn> columns, std::size_t min_rows) {
  if (columns.empty()) fail(Errc::InvalidArgument, "no columns");
  const auto rows = columns.front().values.size();
  for (const auto& c : columns) {
    if (c.values.size() != rows) fail(Errc::DimensionMismatch, "column '" + c.name + "' has a different length");
    require_finite(c.values, c.name.c_str());
  }
  if (rows < min_rows) {
    fail(Errc::TooFewSamples, "need >= " + std::to_string(min_rows) + " rows, got " + std::to_string(rows));
  }
}

}  // namespace

CorrelationMatrix correlation_matrix(std::span<const NamedColumn> columns) {
  check_columns(columns, 3);
  const std::size_t p = columns.size();
  std::vector<std::vector<double>> centered(p);
  std::vector<double> norm(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto& v = columns[j].values;
    const double m = mean(v);
    centered[j].resize(v.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      centered[j][i] = v[i] - m;
      ss += centered[j][i] * centered[j][i];
    }
    if (!(ss > 0.0)) fail(Errc::ZeroVarianceColumn, "column '" + columns[j].name + "' has zero variance");
    norm[j] = std::sqrt(ss);
  }
  CorrelationMatrix out;
  out.r = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    out.names.push_back(columns[j].name);
    for (std::size_t k = j + 1; k < p; ++k) {
      double sxy = 0.0;
      for (std::size_t i = 0; i < centered[j].size(); ++i) sxy += centered[j][i] * centered[k][i];
      const double r = std::clamp(sxy / (norm[j] * norm[k]), -1.0, 1.0);
      out.r(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = r;
      out.r(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = r;
    }
  }
  return out;
}

VifResult vif(std::span<const NamedColumn> design) {
  const std::size_t p = design.size();
  check_columns(design, p + 2);
  const auto n = static_cast<Eigen::Index>(design.front().values.size());
  VifResult out;
  for (std::size_t j = 0; j < p; ++j) {
    out.names.push_back(design[j].name);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = design[j].values[static_cast<std::size_t>(i)];
    const double y_mean = y.mean();
    const double ss_tot = (y.array() - y_mean).square().sum();
    if (!(ss_tot > 0.0)) fail(Errc::ZeroVarianceColumn, "column '" + design[j].name + "' has zero variance");

    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(p));
    x.col(0).setOnes();
    Eigen::Index col = 1;
    for (std::size_t k = 0; k < p; ++k) {
      if (k == j) continue;
      for (Eigen::Index i = 0; i < n; ++i) x(i, col) = design[k].values[static_cast<std::size_t>(i)];
      ++col;
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    const Eigen::VectorXd beta = qr.solve(y);
    const double ss_res = (y - x * beta).squaredNorm();
    const double r2 = 1.0 - ss_res / ss_tot;
    if (r2 >= 1.0 - 1e-12) {
      out.vif.push_back(std::numeric_limits<double>::infinity());
      out.singular = true;
    } else {
      out.vif.push_back(1.0 / (1.0 - r2));
    }
  }
  return out;
}

TrendResult trial_order_effect(std::span<const TrialPoint> trials) {
  if (trials.size() < 3) fail(Errc::TooFewSamples, "trial order effect needs >= 3 trials");
  const double n = static_cast<double>(trials.size());
  double mx = 0.0, my = 0.0;
  bool constant_y = true;
  for (const auto& t : trials) {
    if (!std::isfinite(t.index) || !std::isfinite(t.value)) {
      fail(Errc::InvalidArgument, "trial data contains non-finite values");
    }
    mx += t.index;
    my += t.value;
    constant_y = constant_y && t.value == trials.front().value;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& t : trials) {
    sxx += (t.index - mx) * (t.index - mx);
    sxy += (t.index - mx) * (t.value - my);
  }
  if (!(sxx > 0.0)) fail(Errc::DegenerateDesign, "all trial indices are equal");

  TrendResult r;
  if (constant_y) {
    r.intercept = trials.front().value;
    return r;
  }
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double ss_res = 0.0;
  for (const auto& t : trials) {
    const double e = t.value - (r.intercept + r.slope * t.index);
    ss_res += e * e;
  }
  const double se = std::sqrt(ss_res / (n - 2.0) / sxx);
  if (se == 0.0) {
    r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), r.slope);
    r.p_value = 0.0;
    return r;
  }
  r.t_statistic = r.slope / se;
  const boost::math::students_t dist(n - 2.0);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t_statistic))));
  return r;
}

}  // namespace piw::stats
