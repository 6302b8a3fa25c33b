#include "piw/json_io.hpp"

#include <cmath>
#include <limits>

namespace piw::json_io {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j, const std::string& field, Errc on_error) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) fail(on_error, "field '" + field + "' is not a number");
  return j.get<double>();
}

const json& require(const json& j, const std::string& key, const std::string& path, Errc on_error) {
  if (!j.is_object() || !j.contains(key)) fail(on_error, "missing field '" + path + key + "'");
  return j.at(key);
}

json to_json(const core::NormalizationFit& f) {
  json j;
  j["a"] = f.a;
  j["b"] = f.b;
  j["fitted_on"] = f.fitted_on;
  j["residual_rms"] = f.residual_rms;
  j["agg_min"] = f.agg_min;
  j["agg_max"] = f.agg_max;
  return j;
}

core::NormalizationFit fit_from_json(const json& j, const std::string& path, Errc on_error) {
  core::NormalizationFit f;
  f.a = number_from(require(j, "a", path, on_error), path + "a", on_error);
  f.b = number_from(require(j, "b", path, on_error), path + "b", on_error);
  const auto& fitted_on = require(j, "fitted_on", path, on_error);
  if (!fitted_on.is_number_unsigned()) fail(on_error, "field '" + path + "fitted_on' is not a count");
  f.fitted_on = fitted_on.get<std::size_t>();
  f.residual_rms = number_from(require(j, "residual_rms", path, on_error), path + "residual_rms", on_error);
  if (j.contains("agg_min")) f.agg_min = number_from(j.at("agg_min"), path + "agg_min", on_error);
  if (j.contains("agg_max")) f.agg_max = number_from(j.at("agg_max"), path + "agg_max", on_error);
  return f;
}

json to_json(const wlmodel::ModelNormalization& n) {
  json j;
  j["mode"] = core::agg_normalization_name(n.mode);
  j["lon"] = n.lon ? to_json(*n.lon) : json(nullptr);
  j["lat"] = n.lat ? to_json(*n.lat) : json(nullptr);
  return j;
}

wlmodel::ModelNormalization normalization_from_json(const json& j, const std::string& path, Errc on_error) {
  wlmodel::ModelNormalization n;
  const auto& mode = require(j, "mode", path, on_error);
  if (!mode.is_string()) fail(on_error, "field '" + path + "mode' is not a string");
  try {
    n.mode = core::parse_agg_normalization(mode.get<std::string>());
  } catch (const Error& e) {
    fail(on_error, e.what());
  }
  const auto& lon = require(j, "lon", path, on_error);
  const auto& lat = require(j, "lat", path, on_error);
  if (!lon.is_null()) n.lon = fit_from_json(lon, path + "lon.", on_error);
  if (!lat.is_null()) n.lat = fit_from_json(lat, path + "lat.", on_error);
  return n;
}

std::string normalization_file(const wlmodel::ModelNormalization& n) {
  json doc;
  doc["kind"] = "piw.normalization";
  doc["version"] = 1;
  const json body = to_json(n);
  for (const auto& [key, value] : body.items()) doc[key] = value;
  return doc.dump(2) + "\n";
}

wlmodel::ModelNormalization parse_normalization_file(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::MalformedFile, std::string("normalization file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(Errc::MalformedFile, "normalization file is not a JSON object");
  if (doc.contains("version") && doc["version"] != 1) {
    fail(Errc::MalformedFile, "unsupported normalization file version " + doc["version"].dump());
  }
  // Accept a model file too: its normalization block is the same object.
  if (doc.contains("normalization")) return normalization_from_json(doc.at("normalization"), "normalization.", Errc::MalformedFile);
  return normalization_from_json(doc, "", Errc::MalformedFile);
}

}  // namespace piw::json_io
