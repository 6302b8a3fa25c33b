#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "piw/error.hpp"
#include "piw/telemetry.hpp"
#include "support.hpp"

using namespace piw;
using namespace piw::telemetry;

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

}  // namespace

TEST_SUITE("telemetry") {
  TEST_CASE("parse a three-row log") {
    const auto raw = parse_log_text("t,lon,lat\n0.0,0,0\n0.01,0.1,0\n0.02,0.2,0\n");
    REQUIRE(raw.samples.size() == 3);
    CHECK(raw.samples[1].t == 0.01);
    CHECK(raw.samples[2].lon == 0.2);
    CHECK(raw.max_deflection() == 1.0);
  }

  TEST_CASE("extra columns are ignored and column order is free") {
    const auto raw = parse_log_text("pedal,lat,t,lon\n9,0.5,0,0.25\n9,0.6,0.5,0.35\n");
    REQUIRE(raw.samples.size() == 2);
    CHECK(raw.samples[0].lon == 0.25);
    CHECK(raw.samples[1].lat == 0.6);
  }

  TEST_CASE("repeated timestamp is rejected at its row") {
    try {
      parse_log_text("t,lon,lat\n0.0,0,0\n0.0,0.1,0\n");
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NonMonotoneTime);
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
  }

  TEST_CASE("parse errors") {
    CHECK(error_of([] { parse_log_text("t,lon,lat\n0,NaN,0\n1,0,0\n"); }) == Errc::NonFiniteValue);
    CHECK(error_of([] { parse_log_text("t,lon\n0,0\n1,0\n"); }) == Errc::MissingColumn);
    CHECK(error_of([] { parse_log_text(""); }) == Errc::EmptyLog);
    CHECK(error_of([] { parse_log_text("t,lon,lat\n"); }) == Errc::EmptyLog);
    CHECK(error_of([] { parse_log_text("t,lon,lat\n0,0,0\n"); }) == Errc::EmptyLog);
    CHECK(error_of([] { parse_log_text("t,lon,lat\n0,abc,0\n1,0,0\n"); }) == Errc::NonFiniteValue);
  }

  TEST_CASE("resample at the native rate reproduces the input") {
    std::vector<Sample> s;
    for (int i = 0; i <= 200; ++i) s.push_back({i * 0.01, std::sin(i * 0.1), std::cos(i * 0.07)});
    const auto tr = resample(s, 100.0);
    REQUIRE(tr.size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(std::fabs(tr.lon[i] - s[i].lon) < 1e-12);
      CHECK(std::fabs(tr.lat[i] - s[i].lat) < 1e-12);
    }
  }

  TEST_CASE("linear interpolation at 4 Hz") {
    const std::vector<Sample> s{{0.0, 0.0, 0.0}, {1.0, 1.0, 0.0}};
    const auto tr = resample(s, 4.0);
    REQUIRE(tr.size() == 5);
    const double expect[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int i = 0; i < 5; ++i) CHECK(tr.lon[i] == doctest::Approx(expect[i]).epsilon(1e-15));
    CHECK(tr.dt == 0.25);
  }

  TEST_CASE("500 Hz sine downsampled to 100 Hz stays on the analytic curve") {
    std::vector<Sample> s;
    for (int i = 0; i <= 5000; ++i) {
      const double t = i / 500.0;
      s.push_back({t, std::sin(2.0 * std::numbers::pi * t), 0.0});
    }
    const auto tr = resample(s, 100.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      worst = std::max(worst, std::fabs(tr.lon[i] - std::sin(2.0 * std::numbers::pi * tr.time_at(i))));
    }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("short span and rate bounds") {
    const std::vector<Sample> s{{0.0, 0, 0}, {0.015, 0, 0}};
    CHECK(error_of([&] { resample(s, 100.0); }) == Errc::DegenerateSpan);
    const std::vector<Sample> ok{{0.0, 0, 0}, {1.0, 0, 0}};
    CHECK(error_of([&] { resample(ok, 0.5); }) == Errc::InvalidArgument);
    CHECK(error_of([&] { resample(ok, 1001.0); }) == Errc::InvalidArgument);
  }

  TEST_CASE("resampling properties on irregular logs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> gap(0.002, 0.03), val(-1.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<Sample> s;
      double t = gap(rng);
      for (int i = 0; i < 300; ++i) {
        s.push_back({t, val(rng), val(rng)});
        t += gap(rng);
      }
      for (const auto interp : {Interpolation::linear, Interpolation::nearest}) {
        const auto tr = resample(s, 100.0, interp);
        CHECK(tr.time_at(tr.size() - 1) <= s.back().t + 1e-9);
        CHECK(tr.t0 == s.front().t);
        std::size_t j = 0;
        for (std::size_t i = 0; i < tr.size(); ++i) {
          const double ti = tr.time_at(i);
          while (j + 1 < s.size() && s[j + 1].t < ti) ++j;
          const auto& a = s[j];
          const auto& b = s[std::min(j + 1, s.size() - 1)];
          const double lo = std::min(a.lon, b.lon), hi = std::max(a.lon, b.lon);
          CHECK(tr.lon[i] >= lo - 1e-12);
          CHECK(tr.lon[i] <= hi + 1e-12);
        }
      }
    }
  }

  TEST_CASE("resampling is idempotent on uniform input") {
    std::mt19937_64 rng(5);
    auto lon = testing::random_series(rng, 500);
    auto lat = testing::random_series(rng, 500);
    std::vector<Sample> s;
    for (std::size_t i = 0; i < lon.size(); ++i) s.push_back({i * 0.01, lon[i], lat[i]});
    const auto once = resample(s, 100.0);
    std::vector<Sample> again;
    for (std::size_t i = 0; i < once.size(); ++i) again.push_back({once.time_at(i), once.lon[i], once.lat[i]});
    const auto twice = resample(again, 100.0);
    REQUIRE(twice.size() == once.size());
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(std::fabs(twice.lon[i] - once.lon[i]) < 1e-12);
  }

  TEST_CASE("trace CSV round trip") {
    const auto tr = testing::make_trace({0.1, 0.2, 0.30000000000000004}, {0.0, -0.5, 1.0 / 3.0});
    std::ostringstream os;
    write_trace_csv(os, tr);
    const auto back = resample(parse_log_text(os.str()), 100.0);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back.lon[i] == tr.lon[i]);
      CHECK(back.lat[i] == tr.lat[i]);
    }
  }
}
