#pragma once

#include <map>
#include <string>
#include <vector>

namespace tanktune {

// Plain-text configuration: "[section]" headers, "key = value" lines, '#'
// comments. Keys are stored as "section.key".
class ConfigMap {
 public:
  static ConfigMap from_file(const std::string& path);
  static ConfigMap from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated doubles.
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace tanktune
