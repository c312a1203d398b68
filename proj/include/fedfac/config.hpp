#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace fedfac {

/// Flat `key = value` configuration with dotted namespaces and `#` comments.
/// Parsing is fail-closed: duplicate keys are errors and, once a schema is
/// supplied, so are unknown keys.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated integers; empty value or missing key gives fallback.
  std::vector<long long> get_int_list(const std::string& key,
                                      const std::vector<long long>& fallback) const;

  /// Throws naming the first key not present in `known`.
  void require_known(std::span<const std::string> known) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace fedfac
