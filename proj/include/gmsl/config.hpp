#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gmsl/errors.hpp"
#include "gmsl/numeric.hpp"

namespace gmsl {

// Plain-text key-value configuration with [section] headers, '#' comments,
// and 'key = value' entries. Later duplicates overwrite earlier ones.
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in) {
    Config cfg;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view s = trim(line);
      if (s.empty() || s.front() == '#') continue;
      if (s.front() == '[') {
        if (s.back() != ']' || s.size() < 3)
          throw ParseError(lineno, "malformed section header '" + std::string(s) + "'");
        section = std::string(trim(s.substr(1, s.size() - 2)));
        if (section.empty()) throw ParseError(lineno, "empty section name");
        cfg.sections_[section];
        continue;
      }
      const std::size_t eq = s.find('=');
      if (eq == std::string_view::npos)
        throw ParseError(lineno, "expected 'key = value', got '" + std::string(s) + "'");
      const std::string key(trim(s.substr(0, eq)));
      const std::string value(trim(s.substr(eq + 1)));
      if (key.empty()) throw ParseError(lineno, "empty key");
      cfg.sections_[section][key] = value;
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    return parse(in);
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
  }

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback = "") const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    double v = 0.0;
    if (!try_parse_double(get(section, key), v))
      throw ConfigError("config " + section + "." + key + ": not a number: '" + get(section, key) + "'");
    return v;
  }

  long long get_int(const std::string& section, const std::string& key, long long fallback) const {
    if (!has(section, key)) return fallback;
    long long v = 0;
    if (!try_parse_long(get(section, key), v))
      throw ConfigError("config " + section + "." + key + ": not an integer: '" + get(section, key) + "'");
    return v;
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("config " + section + "." + key + ": not a boolean: '" + v + "'");
  }

  // Semicolon-separated list; empty entries dropped, each entry trimmed.
  std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                    const std::vector<std::string>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<std::string> out;
    for (const auto& piece : split(get(section, key), ';')) {
      auto t = trim(piece);
      if (!t.empty()) out.emplace_back(t);
    }
    return out;
  }

  // Grid notation: "log:lo:hi:n", "lin:lo:hi:n", or explicit "a;b;c".
  std::vector<double> get_grid(const std::string& section, const std::string& key,
                               const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    return parse_grid(get(section, key), section + "." + key);
  }

  static std::vector<double> parse_grid(const std::string& text, const std::string& where) {
    const auto parts = split(text, ':');
    if (parts.size() == 4 && (parts[0] == "log" || parts[0] == "lin")) {
      double lo = 0.0, hi = 0.0;
      long long n = 0;
      if (!try_parse_double(trim(parts[1]), lo) || !try_parse_double(trim(parts[2]), hi) ||
          !try_parse_long(trim(parts[3]), n) || n < 1)
        throw ConfigError("config " + where + ": malformed grid '" + text + "'");
      return parts[0] == "log" ? log_spaced(lo, hi, static_cast<int>(n))
                               : linear_spaced(lo, hi, static_cast<int>(n));
    }
    std::vector<double> out;
    for (const auto& piece : split(text, ';')) {
      auto t = trim(piece);
      if (t.empty()) continue;
      double v = 0.0;
      if (!try_parse_double(t, v))
        throw ConfigError("config " + where + ": not a number: '" + std::string(t) + "'");
      out.push_back(v);
    }
    if (out.empty()) throw ConfigError("config " + where + ": empty grid");
    return out;
  }

  // FNV-1a over the canonical serialization; stable across key order.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [sec, kv] : sections_) {
      h = fnv1a64("[" + sec + "]\n", h);
      for (const auto& [k, v] : kv) h = fnv1a64(k + "=" + v + "\n", h);
    }
    return h;
  }

  std::string hash_hex() const { return to_hex16(hash()); }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

} // namespace gmsl
