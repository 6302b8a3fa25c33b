#pragma once

// Layered run configuration: defaults < INI file < environment < flags,
// resolved key by key.
//
// Keys are "<section>.<key>"; the environment name of a key is
// PIW_<SECTION>_<KEY> in upper case (e.g. PIW_TELEMETRY_RATE_HZ).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "piw/metrics_table.hpp"
#include "piw/piwcore.hpp"
#include "piw/stream.hpp"
#include "piw/telemetry.hpp"

namespace piw::config {

using Settings = std::map<std::string, std::string>;

/// Every recognized key.
const std::vector<std::string>& known_keys();

struct RunConfig {
  core::PIWConfig piw;
  double rate_hz = 100.0;
  telemetry::Interpolation interpolation = telemetry::Interpolation::linear;
  stream::WindowConfig window;
  table::Format format = table::Format::csv;
  std::uint64_t seed = 0;
  bool keep_going = false;
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Reads an INI file. Unknown keys are rejected.
Settings load_ini(const std::filesystem::path& path);

/// Collects PIW_* variables through `getenv` (defaults to std::getenv).
Settings environment(const std::function<const char*(const char*)>& getenv = {});

/// Applies the layers in order; later layers win per key.
RunConfig resolve(const std::vector<Settings>& layers);

std::string env_name(const std::string& key);

}  // namespace piw::config
