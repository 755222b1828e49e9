#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace cohsim {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error in " + path + ": " + e.what());
  }
  return j;
}

// Parses a byte size given either as a plain number or as a string with a
// binary suffix: "64kB", "512K", "4MB", "1GB" (k = 1024).
inline std::uint64_t parse_size(const json& v, const std::string& field) {
  if (v.is_number_unsigned() || v.is_number_integer()) {
    auto n = v.get<std::int64_t>();
    if (n < 0) throw ConfigError(field + ": size must be nonnegative");
    return static_cast<std::uint64_t>(n);
  }
  if (!v.is_string()) throw ConfigError(field + ": expected a size (number or string)");
  std::string s = v.get<std::string>();
  std::size_t i = 0;
  while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) i++;
  if (i == 0) throw ConfigError(field + ": malformed size '" + s + "'");
  double num = std::stod(s.substr(0, i));
  std::string suffix = s.substr(i);
  std::uint64_t mult = 1;
  if (!suffix.empty()) {
    switch (std::tolower(static_cast<unsigned char>(suffix[0]))) {
      case 'k': mult = 1024ULL; break;
      case 'm': mult = 1024ULL * 1024; break;
      case 'g': mult = 1024ULL * 1024 * 1024; break;
      case 'b': mult = 1; break;
      default: throw ConfigError(field + ": unknown size suffix '" + suffix + "'");
    }
  }
  return static_cast<std::uint64_t>(num * static_cast<double>(mult));
}

inline std::uint64_t get_size(const json& obj, const std::string& field, std::uint64_t dflt) {
  if (!obj.contains(field)) return dflt;
  return parse_size(obj.at(field), field);
}

inline std::uint64_t require_size(const json& obj, const std::string& field) {
  if (!obj.contains(field)) throw ConfigError("missing required field: " + field);
  return parse_size(obj.at(field), field);
}

template <typename T>
T get_or(const json& obj, const std::string& field, T dflt) {
  if (!obj.contains(field)) return dflt;
  return obj.at(field).get<T>();
}

inline bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace cohsim
