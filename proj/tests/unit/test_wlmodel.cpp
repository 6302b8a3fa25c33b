#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "piw/error.hpp"
#include "piw/wlmodel.hpp"
#include "support.hpp"

using namespace piw;
using namespace piw::wlmodel;

namespace {

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

struct Dataset {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Dataset simulate(std::size_t n, const std::vector<double>& beta, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  Dataset d{Eigen::MatrixXd(n, beta.size() - 1), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double eta = beta[0];
    for (std::size_t k = 1; k < beta.size(); ++k) {
      d.x(i, k - 1) = g(rng);
      eta += beta[k] * d.x(i, k - 1);
    }
    d.y[i] = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
  }
  return d;
}

/// Plain gradient ascent on the mean log-likelihood, run to a tight gradient.
std::vector<double> gradient_ascent(const Dataset& d, double step, int iterations) {
  const auto n = d.x.rows();
  const auto p = d.x.cols();
  std::vector<double> b(p + 1, 0.0);
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> grad(p + 1, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      double eta = b[0];
      for (Eigen::Index k = 0; k < p; ++k) eta += b[k + 1] * d.x(i, k);
      const double r = d.y[i] - 1.0 / (1.0 + std::exp(-eta));
      grad[0] += r;
      for (Eigen::Index k = 0; k < p; ++k) grad[k + 1] += r * d.x(i, k);
    }
    for (Eigen::Index k = 0; k <= p; ++k) b[k] += step * grad[k] / static_cast<double>(n);
  }
  return b;
}

FitOptions fast() {
  FitOptions o;
  o.profile_ci = false;
  return o;
}

}  // namespace

TEST_SUITE("wlmodel") {
  TEST_CASE("reference fit") {
    Dataset d{Eigen::MatrixXd(16, 2), {0, 1, 0, 1, 1, 0, 1, 0, 0, 0, 1, 0, 1, 1, 1, 0}};
    const double x1[] = {0.12, 0.15, 0.11, 0.18, 0.16, 0.14, 0.19, 0.13, 0.17, 0.15, 0.2, 0.1, 0.16, 0.18, 0.12, 0.14};
    const double x2[] = {0.3, 0.35, 0.28, 0.31, 0.4, 0.33, 0.36, 0.29, 0.38, 0.27, 0.34, 0.32, 0.3, 0.37, 0.26, 0.39};
    for (int i = 0; i < 16; ++i) {
      d.x(i, 0) = x1[i];
      d.x(i, 1) = x2[i];
    }
    const auto r = fit_logistic(d.x, d.y, {"a", "b"});
    CHECK(r.model.converged);
    CHECK_FALSE(r.model.separation);
    const double est[] = {-7.303534104821689, 72.63038932221832, -10.825038512048083};
    const double se[] = {5.355633686225574, 36.26581927579924, 16.398931422806946};
    for (int k = 0; k < 3; ++k) {
      CHECK(r.model.coefficients[k] == doctest::Approx(est[k]).epsilon(1e-6));
      CHECK(r.report.coefficients[k].standard_error == doctest::Approx(se[k]).epsilon(1e-6));
      const auto& c = r.report.coefficients[k];
      CHECK(c.ci_low <= c.estimate);
      CHECK(c.estimate <= c.ci_high);
      CHECK(c.ci_high - c.estimate == doctest::Approx(1.959963984540054 * c.standard_error).epsilon(1e-9));
      REQUIRE(c.profile_low.has_value());
      CHECK(*c.profile_low < c.estimate);
      CHECK(*c.profile_high > c.estimate);
    }
    CHECK(r.model.log_likelihood == doctest::Approx(-7.3143776216670595).epsilon(1e-9));
    CHECK(r.report.fitted[0] == doctest::Approx(0.13759636112661108).epsilon(1e-6));
    CHECK(r.report.fitted[10] == doctest::Approx(0.9718602996259621).epsilon(1e-6));
  }

  TEST_CASE("profile interval brackets the likelihood-ratio cut") {
    const auto d = simulate(200, {0.2, 1.0}, 5);
    FitOptions o;
    const auto r = fit_logistic(d.x, d.y, {"x"}, o);
    const auto& c = r.report.coefficients[1];
    REQUIRE(c.profile_low.has_value());
    // Refit with the slope fixed at the bound via an offset: the deviance
    // rise must equal the chi-square(1) 95% quantile.
    for (const double bound : {*c.profile_low, *c.profile_high}) {
      double b0 = 0.0;
      for (int it = 0; it < 100; ++it) {
        double g = 0.0, h = 0.0;
        for (int i = 0; i < 200; ++i) {
          const double p = logistic(b0 + bound * d.x(i, 0));
          g += d.y[i] - p;
          h += p * (1 - p);
        }
        b0 += g / h;
      }
      double ll = 0.0;
      for (int i = 0; i < 200; ++i) {
        const double p = logistic(b0 + bound * d.x(i, 0));
        ll += d.y[i] ? std::log(p) : std::log1p(-p);
      }
      CHECK(2.0 * (r.model.log_likelihood - ll) == doctest::Approx(3.841458820694124).epsilon(1e-4));
    }
  }

  TEST_CASE("recovery of known coefficients") {
    const std::vector<double> truth{-1.0, 3.0, 0.0};
    const auto d = simulate(10000, truth, 42);
    const auto r = fit_logistic(d.x, d.y, {"x1", "x2"}, fast());
    for (int k = 0; k < 3; ++k) {
      CHECK(std::fabs(r.model.coefficients[k] - truth[k]) < 3.0 * r.report.coefficients[k].standard_error);
    }
    CHECK(r.report.tjur_r2 > 0.0);
  }

  TEST_CASE("fitted probabilities match a gradient-ascent oracle") {
    const auto d = simulate(300, {0.5, -1.2, 0.8}, 8);
    const auto r = fit_logistic(d.x, d.y, {"a", "b"}, fast());
    const auto b = gradient_ascent(d, 4.0, 20000);
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
      const double oracle = logistic(b[0] + b[1] * d.x(i, 0) + b[2] * d.x(i, 1));
      CHECK(std::fabs(r.report.fitted[i] - oracle) < 1e-6);
      const double row[] = {d.x(i, 0), d.x(i, 1)};
      CHECK(predict_probability(r.model, row) == doctest::Approx(r.report.fitted[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("likelihood is non-decreasing and separation is flagged") {
    Eigen::MatrixXd x(8, 1);
    x << -4, -3, -2, -1, 1, 2, 3, 4;
    const std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
    const auto r = fit_logistic(x, y, {"x"}, fast());
    CHECK(r.model.separation);
    CHECK_FALSE(r.report.warnings.empty());
  }

  TEST_CASE("intercept-only closed form and singular slope") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Constant(10, 1, 0.7);
    const std::vector<int> y{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    CHECK(error_of([&] { fit_logistic(x, y, {"c"}, fast()); }) == Errc::SingularInformation);
    Eigen::MatrixXd none(10, 0);
    const auto r = fit_logistic(none, y, {}, fast());
    CHECK(std::fabs(r.model.coefficients[0]) < 1e-12);
  }

  TEST_CASE("preconditions") {
    Eigen::MatrixXd x(5, 1);
    x << 1, 2, 3, 4, 5;
    const std::vector<int> ones{1, 1, 1, 1, 1};
    CHECK(error_of([&] { fit_logistic(x, ones, {"x"}); }) == Errc::OneClassOnly);
    Eigen::MatrixXd small(3, 2);
    small << 1, 2, 3, 4, 5, 7;
    const std::vector<int> y3{0, 1, 0};
    CHECK(error_of([&] { fit_logistic(small, y3, {"a", "b"}); }) == Errc::TooFewSamples);
  }

  TEST_CASE("rescaling a predictor rescales its coefficient only") {
    const auto d = simulate(500, {0.3, 1.1, -0.6}, 21);
    auto scaled = d;
    scaled.x.col(0) *= 250.0;
    const auto a = fit_logistic(d.x, d.y, {"a", "b"}, fast());
    const auto b = fit_logistic(scaled.x, scaled.y, {"a", "b"}, fast());
    CHECK(b.model.coefficients[1] * 250.0 == doctest::Approx(a.model.coefficients[1]).epsilon(1e-8));
    for (std::size_t i = 0; i < a.report.fitted.size(); ++i) {
      CHECK(std::fabs(a.report.fitted[i] - b.report.fitted[i]) < 1e-8);
    }
  }

  TEST_CASE("class swap negates the coefficients") {
    const auto d = simulate(400, {0.4, 0.9, -0.5}, 13);
    auto flipped = d;
    for (auto& v : flipped.y) v = 1 - v;
    const auto a = fit_logistic(d.x, d.y, {"a", "b"}, fast());
    const auto b = fit_logistic(flipped.x, flipped.y, {"a", "b"}, fast());
    for (int k = 0; k < 3; ++k) CHECK(b.model.coefficients[k] == doctest::Approx(-a.model.coefficients[k]).epsilon(1e-9));
  }

  TEST_CASE("standardized fit predicts the same probabilities") {
    const auto d = simulate(400, {0.2, 0.7, 0.4}, 19);
    auto opts = fast();
    opts.standardize = true;
    const auto a = fit_logistic(d.x, d.y, {"a", "b"}, fast());
    const auto b = fit_logistic(d.x, d.y, {"a", "b"}, opts);
    REQUIRE(b.model.standardization.has_value());
    for (Eigen::Index i = 0; i < 20; ++i) {
      const double row[] = {d.x(i, 0), d.x(i, 1)};
      CHECK(predict_probability(b.model, row) == doctest::Approx(predict_probability(a.model, row)).epsilon(1e-8));
    }
  }

  TEST_CASE("prediction") {
    LogisticModel m;
    m.predictor_names = {"lon_piw1"};
    m.coefficients = {-2.0, 4.0};
    const double boundary[] = {0.5};
    CHECK(predict_probability(m, boundary) == 0.5);
    double prev = 0.0;
    for (int i = 0; i < 50; ++i) {
      const double x[] = {i * 0.5};
      const double p = predict_probability(m, x);
      CHECK(p >= prev);
      CHECK(p <= 1.0);
      prev = p;
    }
    const double wrong[] = {0.1, 0.2};
    CHECK(error_of([&] { predict_probability(m, wrong); }) == Errc::DimensionMismatch);
    try {
      predict_probability(m, std::map<std::string, double>{{"lat_piw1", 0.3}});
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::DimensionMismatch);
      CHECK(std::string(e.what()).find("lon_piw1") != std::string::npos);
    }
  }

  TEST_CASE("Tjur R2") {
    const std::vector<int> y{0, 1, 1, 0, 1};
    const std::vector<double> perfect{0, 1, 1, 0, 1}, flat(5, 0.25), inverted{1, 0, 0, 1, 0};
    CHECK(tjur_r2(perfect, y) == 1.0);
    CHECK(tjur_r2(flat, y) == 0.0);
    CHECK(tjur_r2(inverted, y) == -1.0);
    const std::vector<int> one{1, 1};
    const std::vector<double> p2{0.3, 0.6};
    CHECK(error_of([&] { tjur_r2(p2, one); }) == Errc::OneClassOnly);
  }

  TEST_CASE("model file round trip and corruption") {
    const auto d = simulate(300, {0.1, 0.9, -0.4}, 3);
    auto r = fit_logistic(d.x, d.y, {"lat_piw1", "lon_piw1"}, fast());
    core::NormalizationFit f;
    f.a = 0.1 / 3.0;
    f.b = 2.0 / 7.0;
    f.fitted_on = 30;
    f.residual_rms = 0.012345678901234567;
    f.agg_min = 1e-4;
    f.agg_max = 3.3;
    r.model.normalization.lon = f;
    testing::ScratchDir dir("model");
    const auto path = dir.path() / "m.json";
    save_model(r.model, path);
    const auto back = load_model(path);
    CHECK(back.coefficients == r.model.coefficients);
    CHECK(back.predictor_names == r.model.predictor_names);
    REQUIRE(back.normalization.lon.has_value());
    CHECK(back.normalization.lon->a == f.a);
    CHECK(back.normalization.lon->b == f.b);
    CHECK(back.normalization.lon->residual_rms == f.residual_rms);
    CHECK_FALSE(back.normalization.lat.has_value());
    CHECK((back.covariance - r.model.covariance).cwiseAbs().maxCoeff() == 0.0);

    auto text = model_to_json(r.model);
    auto bad = text;
    bad.replace(bad.find("\"version\": 1"), 12, "\"version\": 99");
    CHECK(error_of([&] { model_from_json(bad); }) == Errc::CorruptModelFile);
    auto doc = nlohmann::json::parse(text);
    doc.erase("normalization");
    try {
      model_from_json(doc.dump());
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::CorruptModelFile);
      CHECK(std::string(e.what()).find("normalization") != std::string::npos);
    }
    CHECK(error_of([&] { model_from_json("{not json"); }) == Errc::CorruptModelFile);
  }
}
