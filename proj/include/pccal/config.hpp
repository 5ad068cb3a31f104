#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pccal {

/// Plain-text `key = value` settings. Blank lines and text after `#` are
/// ignored; keys are unique. Relative paths resolve against the directory of
/// the file they were read from.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>");
  static KeyValueConfig read(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  /// Throws ValidationError naming the key when absent.
  std::string require(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::optional<std::filesystem::path> get_path(const std::string& key) const;

  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;
  /// Throws ValidationError for any key that is neither listed nor under one
  /// of the prefixes.
  void check_known(const std::set<std::string>& keys, const std::vector<std::string>& prefixes) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  std::map<std::string, std::string> values_;
  std::filesystem::path base_dir_ = ".";
};

/// Comma-separated numbers.
std::vector<double> parse_number_list(const std::string& text, const std::string& context);

}  // namespace pccal
