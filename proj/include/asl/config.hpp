#pragma once

// Key-value config files and ASL_* environment overrides.
//
// File format, one `key = value` per line, `#` starts a comment:
//
//   core_map      = 0-3:big,4-7:little
//   emulate_a     = 4.7
//   pct           = 99
//   min_unit_ns   = 100
//   max_window_ns = 100000000
//   threshold_ns  = 200
//   max_epochs    = 64
//
// The same keys are read from the environment upper-cased with an ASL_
// prefix (ASL_CORE_MAP, ASL_EMULATE_A, ...). Environment wins over file.

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "asl/platform.hpp"
#include "asl/runtime.hpp"

namespace asl {

struct Settings {
  RuntimeConfig runtime;
  std::optional<CoreTypeMap> core_map;
  double emulate_a = 4.7;
};

namespace detail {

inline std::string trim_copy(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + v + "'");
  }
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + v + "'");
  }
}

inline void apply_setting(Settings& s, const std::string& key, const std::string& value) {
  if (key == "core_map") {
    s.core_map = CoreTypeMap::parse(value);
  } else if (key == "emulate_a") {
    s.emulate_a = parse_double(key, value);
  } else if (key == "pct") {
    s.runtime.slo.pct = static_cast<int>(parse_u64(key, value));
  } else if (key == "min_unit_ns") {
    s.runtime.slo.min_unit_ns = parse_u64(key, value);
  } else if (key == "max_window_ns") {
    s.runtime.slo.max_window_ns = parse_u64(key, value);
  } else if (key == "threshold_ns") {
    s.runtime.threshold_ns = parse_u64(key, value);
  } else if (key == "max_epochs") {
    s.runtime.max_epochs = static_cast<int>(parse_u64(key, value));
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

inline constexpr const char* kSettingKeys[] = {"core_map",      "emulate_a",    "pct",
                                               "min_unit_ns",   "max_window_ns", "threshold_ns",
                                               "max_epochs"};

}  // namespace detail

inline void validate(const Settings& s) {
  s.runtime.validate();
  if (!(s.emulate_a >= 1.0)) throw ConfigError("emulate_a must be >= 1");
}

inline void apply_config_text(Settings& s, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::string t = detail::trim_copy(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    detail::apply_setting(s, detail::trim_copy(std::string_view(t).substr(0, eq)),
                          detail::trim_copy(std::string_view(t).substr(eq + 1)));
  }
}

inline void apply_config_file(Settings& s, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  apply_config_text(s, buf.str());
}

inline void apply_environment(Settings& s) {
  for (const char* key : detail::kSettingKeys) {
    std::string env = "ASL_";
    for (const char* p = key; *p; ++p) env += static_cast<char>(std::toupper(*p));
    if (const char* v = std::getenv(env.c_str())) detail::apply_setting(s, key, detail::trim_copy(v));
  }
}

/// Defaults, then `path` (if non-empty), then the environment.
inline Settings load_settings(const std::string& path = {}) {
  Settings s;
  if (!path.empty()) apply_config_file(s, path);
  apply_environment(s);
  validate(s);
  return s;
}

}  // namespace asl
