#pragma once

// Minimal structured-text reader shared by the sensor catalog and the simulation
// config: `[section]` headers, `key = value` lines, `#` or `;` comments.
// Keys are addressed as "section.key".

#include "lidarsim/common.hpp"

#include <charconv>
#include <map>
#include <sstream>
#include <string_view>

namespace lidarsim {

class ConfigError : public Error {
public:
  ConfigError(const std::string& key, int line, const std::string& what)
      : Error(format(key, line, what)), key_(key), line_(line) {}
  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }

private:
  static std::string format(const std::string& key, int line, const std::string& what) {
    std::string s = "config";
    if (line > 0) s += " line " + std::to_string(line);
    if (!key.empty()) s += " key '" + key + "'";
    return s + ": " + what;
  }
  std::string key_;
  int line_;
};

struct IniEntry {
  std::string section;
  std::string key;    // section.key, or key when outside any section
  std::string value;
  int line = 0;
};

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<IniEntry> parse_ini(std::string_view text) {
  std::vector<IniEntry> out;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line = trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line[0] == '#' || line[0] == ';') {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", line_no, "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("", line_no, "empty section name");
    } else {
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("", line_no, "expected 'key = value'");
      std::string key = trim(std::string_view(line).substr(0, eq));
      std::string value = trim(std::string_view(line).substr(eq + 1));
      if (key.empty()) throw ConfigError("", line_no, "empty key");
      out.push_back({section, section.empty() ? key : section + "." + key, value, line_no});
    }
    if (end == text.size()) break;
  }
  return out;
}

inline double ini_double(const IniEntry& e) {
  double v = 0.0;
  std::string_view s = e.value;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError(e.key, e.line, "expected a finite number, got '" + e.value + "'");
  return v;
}

inline long long ini_int(const IniEntry& e) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
  if (ec != std::errc{} || ptr != e.value.data() + e.value.size())
    throw ConfigError(e.key, e.line, "expected an integer, got '" + e.value + "'");
  return v;
}

inline bool ini_bool(const IniEntry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes" || e.value == "on") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no" || e.value == "off") return false;
  throw ConfigError(e.key, e.line, "expected a boolean, got '" + e.value + "'");
}

inline std::vector<double> ini_list(const IniEntry& e) {
  std::vector<double> out;
  std::stringstream ss(e.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    IniEntry tmp = e;
    tmp.value = trim(item);
    out.push_back(ini_double(tmp));
  }
  return out;
}

/// Formats a double so that it parses back to the identical value.
inline std::string ini_format(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace lidarsim
