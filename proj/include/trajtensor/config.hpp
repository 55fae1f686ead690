#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace trajtensor {

/// Sectioned key = value configuration file. '#' starts a comment; keys keep
/// file order so the echo into reports matches the source.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  std::string require_string(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  void set_double(const std::string& section, const std::string& key, double value);
  void set_int(const std::string& section, const std::string& key, int64_t value);

  /// "section.key" -> value, in insertion order.
  std::vector<std::pair<std::string, std::string>> flat() const;

  /// FNV-1a over the sorted flat view; stable across runs, changes with any
  /// value. hex8 is the short form embedded in output file names.
  uint64_t hash() const;
  std::string hash_hex8() const;

 private:
  struct Entry {
    std::string section, key, value;
  };
  const Entry* find(const std::string& section, const std::string& key) const;
  std::vector<Entry> entries_;
  std::string origin_;
};

}  // namespace trajtensor
