#include "piw/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "piw/error.hpp"

namespace piw::config {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "piw.thr",           "piw.delta_max",     "piw.diff_mode",      "piw.agg_normalization",
      "telemetry.rate_hz", "telemetry.interpolation", "stream.window", "stream.hop",
      "stream.warmup",     "output.format",     "run.seed",           "run.keep_going",
      "run.threads"};
  return keys;
}

namespace {

bool known(const std::string& key) {
  const auto& k = known_keys();
  return std::find(k.begin(), k.end(), key) != k.end();
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    fail(Errc::InvalidArgument, "config '" + key + "': not a number: '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    fail(Errc::InvalidArgument, "config '" + key + "': not an unsigned integer: '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail(Errc::InvalidArgument, "config '" + key + "': not a boolean: '" + v + "'");
}

void apply(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "piw.thr") c.piw.thr = to_double(key, v);
  else if (key == "piw.delta_max") c.piw.delta_max = to_double(key, v);
  else if (key == "piw.diff_mode") c.piw.diff_mode = core::parse_diff_mode(v);
  else if (key == "piw.agg_normalization") c.piw.agg_normalization = core::parse_agg_normalization(v);
  else if (key == "telemetry.rate_hz") c.rate_hz = c.window.rate_hz = to_double(key, v);
  else if (key == "telemetry.interpolation") c.interpolation = c.window.interpolation = telemetry::parse_interpolation(v);
  else if (key == "stream.window") c.window.window = to_double(key, v);
  else if (key == "stream.hop") c.window.hop = to_double(key, v);
  else if (key == "stream.warmup") c.window.warmup = stream::parse_warmup(v);
  else if (key == "output.format") c.format = table::parse_format(v);
  else if (key == "run.seed") c.seed = to_u64(key, v);
  else if (key == "run.keep_going") c.keep_going = to_bool(key, v);
  else if (key == "run.threads") c.threads = static_cast<unsigned>(to_u64(key, v));
  else fail(Errc::InvalidArgument, "unknown config key '" + key + "'");
}

}  // namespace

std::string env_name(const std::string& key) {
  std::string out = "PIW_";
  for (char ch : key) out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

Settings load_ini(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(Errc::InvalidArgument, std::string("config file: ") + e.what());
  }
  Settings s;
  for (const auto& [section, body] : tree) {
    if (body.empty()) fail(Errc::InvalidArgument, "config file: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!known(full)) fail(Errc::InvalidArgument, "config file: unknown key '" + full + "'");
      s[full] = value.get_value<std::string>();
    }
  }
  return s;
}

Settings environment(const std::function<const char*(const char*)>& getenv) {
  Settings s;
  for (const auto& key : known_keys()) {
    const auto name = env_name(key);
    const char* v = getenv ? getenv(name.c_str()) : std::getenv(name.c_str());
    if (v && *v) s[key] = v;
  }
  return s;
}

RunConfig resolve(const std::vector<Settings>& layers) {
  Settings merged;
  for (const auto& layer : layers) {
    for (const auto& [k, v] : layer) merged[k] = v;
  }
  RunConfig c;
  for (const auto& [k, v] : merged) apply(c, k, v);
  c.piw.validate();
  c.window.validate();
  return c;
}

}  // namespace piw::config
