#pragma once

// JSON encodings shared by model files, fit files and metrics documents.

#include <string>

#include <nlohmann/json.hpp>

#include "piw/error.hpp"
#include "piw/piwcore.hpp"
#include "piw/wlmodel.hpp"

namespace piw::json_io {

using json = nlohmann::ordered_json;

/// Finite numbers as-is, non-finite as null.
json number_or_null(double v);
/// Inverse of number_or_null (null reads back as +inf).
double number_from(const json& j, const std::string& field, Errc on_error);

/// j[key], failing with `on_error` and the dotted field path when absent.
const json& require(const json& j, const std::string& key, const std::string& path, Errc on_error);

json to_json(const core::NormalizationFit& f);
core::NormalizationFit fit_from_json(const json& j, const std::string& path, Errc on_error);

json to_json(const wlmodel::ModelNormalization& n);
wlmodel::ModelNormalization normalization_from_json(const json& j, const std::string& path, Errc on_error);

/// Standalone normalization file ({"kind": "piw.normalization", ...}).
std::string normalization_file(const wlmodel::ModelNormalization& n);
wlmodel::ModelNormalization parse_normalization_file(const std::string& text);

}  // namespace piw::json_io
