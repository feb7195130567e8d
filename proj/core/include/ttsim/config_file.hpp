#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttsim/errors.hpp"

namespace ttsim {

// Raised for malformed or invalid configuration, with a source:line prefix.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

struct ConfigEntry {
  std::string section;  // "" before the first [section] header
  std::string key;
  std::string value;    // raw text after '=', trimmed, comments removed
  int line = 0;
};

// TOML-style subset: [section] headers, key = value lines, '#' comments.
// Values are bare numbers, true/false, "double-quoted strings", or flat
// [a, b, c] lists of those.
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text, std::string source = "<config>");
  static ConfigFile load(const std::filesystem::path& path);

  const std::string& source() const noexcept { return source_; }
  std::span<const ConfigEntry> entries() const noexcept { return entries_; }

  [[noreturn]] void fail(const ConfigEntry& entry, const std::string& message) const;

  double as_double(const ConfigEntry& entry) const;
  std::int64_t as_int(const ConfigEntry& entry) const;
  std::uint64_t as_u64(const ConfigEntry& entry) const;
  bool as_bool(const ConfigEntry& entry) const;
  std::string as_string(const ConfigEntry& entry) const;
  std::vector<double> as_double_list(const ConfigEntry& entry) const;

 private:
  std::string source_;
  std::vector<ConfigEntry> entries_;
};

// Parses "0.5,1,2" (command-line rate lists).
std::vector<double> parse_double_list(std::string_view text);

}  // namespace ttsim
