#pragma once

// Shared helpers for the unit suites: seeded inputs, direct-formula oracles
// and scratch directories.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "piw/piwcore.hpp"
#include "piw/telemetry.hpp"

namespace piw::testing {

inline std::vector<double> random_series(std::mt19937_64& rng, std::size_t n, double sd = 0.2) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> d(n);
  double level = 0.0;
  for (auto& v : d) {
    level += g(rng);
    v = level;
  }
  return d;
}

/// Holds-and-moves series: repeated values so that zero-rate intervals occur.
inline std::vector<double> sticky_series(std::mt19937_64& rng, std::size_t n, double resolution = 0.01) {
  std::bernoulli_distribution move(0.5);
  std::normal_distribution<double> g(0.0, 0.05);
  std::vector<double> d(n);
  double level = 0.0;
  for (auto& v : d) {
    if (move(rng)) level += g(rng);
    v = std::round(level / resolution) * resolution;
  }
  return d;
}

/// Active-interval count written straight from the case split: an interval
/// is idle only when the rate is below thr and the stick is below delta_max.
inline double oracle_duty_cycle(const std::vector<double>& d, double dt, double thr, double delta_max) {
  double active = 0.0;
  for (std::size_t i = 1; i < d.size(); ++i) {
    const double rate = std::fabs((d[i] - d[i - 1]) / dt);
    const bool idle = (thr > 0.0 ? rate < thr : rate == 0.0) && std::fabs(d[i]) < delta_max;
    if (!idle) active += 1.0;
  }
  return active / static_cast<double>(d.size() - 1);
}

inline double oracle_aggressiveness(const std::vector<double>& d, double dt, std::size_t lag = 1) {
  long double sum = 0.0L;
  for (std::size_t i = lag; i < d.size(); ++i) {
    const long double r = (static_cast<long double>(d[i]) - d[i - lag]) / dt;
    sum += r * r;
  }
  return static_cast<double>(std::sqrt(sum / static_cast<long double>(d.size() - lag)));
}

inline telemetry::StickTrace make_trace(std::vector<double> lon, std::vector<double> lat, double dt = 0.01) {
  telemetry::StickTrace t;
  t.dt = dt;
  t.lon = std::move(lon);
  t.lat = std::move(lat);
  return t;
}

inline bool rel_close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("piw-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace piw::testing
