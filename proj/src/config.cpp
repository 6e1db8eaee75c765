#include "storyframe/config.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "storyframe/error.hpp"
#include "storyframe/fs_util.hpp"

namespace storyframe {

Config Config::load(const std::filesystem::path& path) { return parse(read_file(path)); }

Config Config::parse(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::InvalidArgument, std::string("config: ") + e.what());
  }
  Config config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      // Top-level key outside any section.
      config.set("", section, body.data());
      continue;
    }
    for (const auto& [key, value] : body) config.set(section, key, value.data());
  }
  return config;
}

void Config::set(const std::string& section, const std::string& key, std::string value) {
  values_[section][key] = std::move(value);
}

std::string env_override_name(const std::string& section, const std::string& key) {
  std::string name = "STORYFRAME_";
  auto append = [&](const std::string& s) {
    for (char c : s) name += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(c)) : '_';
  };
  append(section);
  name += '_';
  append(key);
  return name;
}

std::optional<std::string> Config::raw(const std::string& section, const std::string& key) const {
  if (const char* env = std::getenv(env_override_name(section, key).c_str())) return std::string(env);
  const auto s = values_.find(section);
  if (s == values_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
  return raw(section, key).value_or(fallback);
}

long Config::get_int(const std::string& section, const std::string& key, long fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const long out = std::stol(*v, &used);
    if (used == v->size()) return out;
  } catch (const std::exception&) {
  }
  throw Error(Errc::InvalidArgument, "config " + section + "." + key + " is not an integer: " + *v);
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double out = std::stod(*v, &used);
    if (used == v->size()) return out;
  } catch (const std::exception&) {
  }
  throw Error(Errc::InvalidArgument, "config " + section + "." + key + " is not a number: " + *v);
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
  if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
  throw Error(Errc::InvalidArgument, "config " + section + "." + key + " is not a boolean: " + *v);
}

LayoutSpec layout_from_config(const Config& config, LayoutSpec base) {
  base.frame_height = static_cast<int>(config.get_int("layout", "frame_height", base.frame_height));
  base.border_thickness = static_cast<int>(config.get_int("layout", "border_thickness", base.border_thickness));
  base.checker_cell = static_cast<int>(config.get_int("layout", "checker_cell", base.checker_cell));
  base.width_multiple = static_cast<int>(config.get_int("layout", "width_multiple", base.width_multiple));
  base.check();
  return base;
}

BackendSettings backend_from_config(const Config& config, const std::string& section) {
  BackendSettings s;
  s.kind = config.get_string(section, "backend", s.kind);
  if (s.kind != "mock" && s.kind != "http") {
    throw Error(Errc::InvalidArgument, "config " + section + ".backend must be mock or http, got " + s.kind);
  }
  s.endpoint = config.get_string(section, "endpoint", s.endpoint);
  s.api_key = config.get_string(section, "api_key", s.api_key);
  s.model = config.get_string(section, "model", s.model);
  s.max_concurrency = static_cast<int>(config.get_int(section, "max_concurrency", s.max_concurrency));
  s.timeout_seconds = static_cast<int>(config.get_int(section, "timeout_seconds", s.timeout_seconds));
  if (s.kind == "http" && s.endpoint.empty()) {
    throw Error(Errc::InvalidArgument, "config " + section + ".endpoint is required for the http backend");
  }
  return s;
}

}  // namespace storyframe
