#include "ttsim/config_file.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace ttsim {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Drops a trailing '#' comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc{} && ptr == end && !text.empty();
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : InvalidArgument(line > 0 ? fmt::format("{}:{}: {}", source, line, message)
                               : fmt::format("{}: {}", source, message)),
      line_(line) {}

ConfigFile ConfigFile::parse(std::string_view text, std::string source) {
  ConfigFile cfg;
  cfg.source_ = std::move(source);
  std::string section;
  std::set<std::pair<std::string, std::string>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(cfg.source_, line_no, "unterminated section header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (!valid_name(name)) {
        throw ConfigError(cfg.source_, line_no, fmt::format("invalid section name '{}'", name));
      }
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(cfg.source_, line_no, "expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (!valid_name(key)) throw ConfigError(cfg.source_, line_no, fmt::format("invalid key '{}'", key));
    if (value.empty()) throw ConfigError(cfg.source_, line_no, fmt::format("missing value for '{}'", key));
    if (!seen.emplace(section, std::string(key)).second) {
      throw ConfigError(cfg.source_, line_no, fmt::format("duplicate key '{}'", key));
    }
    cfg.entries_.push_back({section, std::string(key), std::string(value), line_no});
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), 0, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void ConfigFile::fail(const ConfigEntry& entry, const std::string& message) const {
  throw ConfigError(source_, entry.line, message);
}

double ConfigFile::as_double(const ConfigEntry& entry) const {
  double v = 0.0;
  if (!parse_number(entry.value, v)) fail(entry, fmt::format("'{}' expects a number, got {}", entry.key, entry.value));
  return v;
}

std::int64_t ConfigFile::as_int(const ConfigEntry& entry) const {
  std::int64_t v = 0;
  if (!parse_number(entry.value, v)) fail(entry, fmt::format("'{}' expects an integer, got {}", entry.key, entry.value));
  return v;
}

std::uint64_t ConfigFile::as_u64(const ConfigEntry& entry) const {
  std::uint64_t v = 0;
  if (!parse_number(entry.value, v)) {
    fail(entry, fmt::format("'{}' expects a non-negative integer, got {}", entry.key, entry.value));
  }
  return v;
}

bool ConfigFile::as_bool(const ConfigEntry& entry) const {
  if (entry.value == "true") return true;
  if (entry.value == "false") return false;
  fail(entry, fmt::format("'{}' expects true or false, got {}", entry.key, entry.value));
}

std::string ConfigFile::as_string(const ConfigEntry& entry) const {
  const std::string_view v = entry.value;
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') {
    fail(entry, fmt::format("'{}' expects a quoted string, got {}", entry.key, entry.value));
  }
  const auto inner = v.substr(1, v.size() - 2);
  if (inner.find('"') != std::string_view::npos) fail(entry, "embedded quotes are not supported");
  return std::string(inner);
}

std::vector<double> ConfigFile::as_double_list(const ConfigEntry& entry) const {
  const std::string_view v = entry.value;
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    fail(entry, fmt::format("'{}' expects a list like [0.5, 1, 2], got {}", entry.key, entry.value));
  }
  try {
    return parse_double_list(v.substr(1, v.size() - 2));
  } catch (const InvalidArgument& e) {
    fail(entry, fmt::format("'{}': {}", entry.key, e.what()));
  }
}

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = text.substr(pos, comma == std::string_view::npos ? text.size() - pos : comma - pos);
    double v = 0.0;
    if (!parse_number(item, v)) throw InvalidArgument(fmt::format("bad number '{}'", trim(item)));
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace ttsim
