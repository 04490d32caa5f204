#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sbe/errors.hpp"
#include "sbe/io.hpp"

namespace sbe {

/* `key = value` run configuration.
 *
 * One assignment per line; `#` starts a comment anywhere on a line; blank
 * lines are ignored.  Values keep insertion order so a written manifest
 * re-parses into the same configuration.  Fractions like `1/1024` are parsed
 * exactly (numerator over denominator in double arithmetic, no decimal
 * round-trip); plain decimals work too.
 */

struct ConfigEntry {
  std::string key;
  std::string value;
};

class Config {
 public:
  Config() = default;

  void set(std::string key, std::string value) {
    for (ConfigEntry& e : entries_)
      if (e.key == key) {
        e.value = std::move(value);
        return;
      }
    entries_.push_back({std::move(key), std::move(value)});
  }

  bool has(std::string_view key) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const ConfigEntry& e) { return e.key == key; });
  }

  std::optional<std::string> raw(std::string_view key) const {
    for (const ConfigEntry& e : entries_)
      if (e.key == key) return e.value;
    return std::nullopt;
  }

  const std::vector<ConfigEntry>& entries() const { return entries_; }

 private:
  std::vector<ConfigEntry> entries_;
};

namespace detail {

inline std::string strip(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

// Parse a decimal number or an exact fraction "p/q".
inline double parse_fraction(const std::string& text) {
  const std::string s = detail::strip(text);
  if (s.empty()) throw ConfigError("empty numeric value");
  const std::size_t slash = s.find('/');
  if (slash != std::string::npos) {
    const std::string num = detail::strip(s.substr(0, slash));
    const std::string den = detail::strip(s.substr(slash + 1));
    try {
      std::size_t used = 0;
      const double p = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument(num);
      used = 0;
      const double q = std::stod(den, &used);
      if (used != den.size()) throw std::invalid_argument(den);
      if (q == 0.0) throw ConfigError("fraction with zero denominator: " + s);
      return p / q;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("cannot parse fraction: " + s);
    }
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse number: " + s);
  }
}

// Comma- or whitespace-separated list of numbers/fractions.
inline std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::string normalized = text;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream items(normalized);
  std::string token;
  while (items >> token) out.push_back(parse_fraction(token));
  if (out.empty()) throw ConfigError("empty list value: " + text);
  return out;
}

inline Config parse_config_text(const std::string& text) {
  Config cfg;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = detail::strip(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not `key = value`: " + stripped);
    const std::string key = detail::strip(stripped.substr(0, eq));
    const std::string value = detail::strip(stripped.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + " has an empty key");
    cfg.set(key, value);
  }
  return cfg;
}

inline Config parse_config_file(const std::filesystem::path& path) {
  return parse_config_text(read_file(path));
}

// Typed getters.  Each reports the violated requirement by name so a bad
// value in a config file reads like a bad flag on the command line.

inline double get_number(const Config& cfg, const std::string& key, double fallback) {
  const auto raw = cfg.raw(key);
  return raw ? parse_fraction(*raw) : fallback;
}

inline std::int64_t get_integer(const Config& cfg, const std::string& key,
                                std::int64_t fallback) {
  const auto raw = cfg.raw(key);
  if (!raw) return fallback;
  const double v = parse_fraction(*raw);
  const auto rounded = static_cast<std::int64_t>(std::llround(v));
  if (static_cast<double>(rounded) != v)
    throw ConfigError(key + " must be an integer, got " + *raw);
  return rounded;
}

inline std::uint64_t get_seed(const Config& cfg, const std::string& key,
                              std::uint64_t fallback) {
  const auto raw = cfg.raw(key);
  if (!raw) return fallback;
  const std::string s = detail::strip(*raw);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError(key + " must be a nonnegative integer, got " + *raw);
  return v;
}

inline std::vector<double> get_number_list(const Config& cfg, const std::string& key,
                                           std::vector<double> fallback) {
  const auto raw = cfg.raw(key);
  return raw ? parse_number_list(*raw) : std::move(fallback);
}

inline std::string get_string(const Config& cfg, const std::string& key,
                              std::string fallback) {
  const auto raw = cfg.raw(key);
  return raw ? *raw : std::move(fallback);
}

}  // namespace sbe
