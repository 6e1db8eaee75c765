#pragma once

// INI-style configuration with sections named after modules:
//
//   [service]
//   port = 8080
//   [generation]
//   frame_height = 272
//
// Any key can be overridden by the environment variable
// STORYFRAME_<SECTION>_<KEY> (upper-cased). Command-line flags win over both.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "storyframe/sheet_codec.hpp"

namespace storyframe {

class Config {
 public:
  Config() = default;

  // Throws Error(IoError) when the file is unreadable and
  // Error(InvalidArgument) on syntax errors.
  static Config load(const std::filesystem::path& path);
  static Config parse(std::string_view text);

  void set(const std::string& section, const std::string& key, std::string value);

  // Environment override first, then file value.
  std::optional<std::string> raw(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
};

std::string env_override_name(const std::string& section, const std::string& key);

// [layout] frame_height, border_thickness, checker_cell, width_multiple.
LayoutSpec layout_from_config(const Config& config, LayoutSpec base = {});

struct BackendSettings {
  std::string kind = "mock";  // "mock" or "http"
  std::string endpoint;       // http://host:port/path
  std::string api_key;
  std::string model;
  int max_concurrency = 1;
  int timeout_seconds = 120;
};

// Reads [<section>] backend, endpoint, api_key, model, max_concurrency, timeout_seconds.
BackendSettings backend_from_config(const Config& config, const std::string& section);

}  // namespace storyframe
