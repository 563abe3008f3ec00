#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hmamba {

/// Flat dotted-key configuration: one `key = value` per line, `#` starts a
/// comment. Keys are ordered, so a saved snapshot is byte-stable and can
/// rerun any command. Schema version is carried in `config_version`.
class RunConfig {
 public:
  static constexpr int kVersion = 1;

  RunConfig();

  static RunConfig from_file(const std::string& path);
  void merge_file(const std::string& path);  // file values override current
  void save(const std::string& path) const;
  std::string to_string() const;

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  void set_int(const std::string& key, long v);
  void set_double(const std::string& key, double v);

  std::string get_str(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated integer list.
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace hmamba
