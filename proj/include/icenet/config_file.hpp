#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "icenet/error.hpp"

namespace icenet {

/// Plain-text key=value configuration. Blank lines and '#' comments are
/// ignored; later keys override earlier ones.
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse(const std::string& text) {
    ConfigFile cf;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
      const auto key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      cf.values_[key] = trim(line.substr(eq + 1));
    }
    return cf;
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ResolutionError(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
  }

  long long get(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long long v = 0;
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("config key '" + key + "': not an integer");
    return v;
  }

  int get(const std::string& key, int fallback) const {
    return static_cast<int>(get(key, static_cast<long long>(fallback)));
  }

  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::istringstream in(it->second);
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(to_double(key, item));
    }
    return out;
  }

  /// Keys not in `known` — typos should fail loudly rather than be ignored.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      bool found = false;
      for (const auto& kk : known) found = found || kk == k;
      if (!found) out.push_back(k);
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
  }

  static double to_double(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw ConfigError("config key '" + key + "': trailing characters");
      return v;
    } catch (const std::logic_error&) {
      throw ConfigError("config key '" + key + "': not a number");
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace icenet
