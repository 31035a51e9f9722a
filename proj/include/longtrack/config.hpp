// SPDX-License-Identifier: Apache-2.0
//
// Plain-text key=value configuration files. Blank lines and '#' comments are
// ignored; unknown keys are errors.
#ifndef LONGTRACK_CONFIG_HPP
#define LONGTRACK_CONFIG_HPP

#include <fstream>
#include <map>
#include <set>
#include <string>

#include "longtrack/common.hpp"

namespace longtrack {

class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoFailure, "cannot open config " + path);
    KeyValueConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        fail(ErrorKind::ConfigError,
             path + ":" + std::to_string(line_no) + ": expected key=value");
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        fail(ErrorKind::ConfigError, path + ":" + std::to_string(line_no) + ": empty key");
      if (!cfg.values_.emplace(key, value).second)
        fail(ErrorKind::ConfigError,
             path + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  long get_int(const std::string& key, long fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      long v = std::stol(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::ConfigError, "key '" + key + "': not an integer: " + it->second);
    }
  }

  double get_double(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::ConfigError, "key '" + key + "': not a number: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "1" || it->second == "true") return true;
    if (it->second == "0" || it->second == "false") return false;
    fail(ErrorKind::ConfigError, "key '" + key + "': not a boolean: " + it->second);
  }

  // Call after reading every supported key.
  void reject_unknown() const {
    for (const auto& [key, value] : values_)
      if (!used_.count(key)) fail(ErrorKind::ConfigError, "unknown config key '" + key + "'");
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

}  // namespace longtrack

#endif  // LONGTRACK_CONFIG_HPP
