#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace vio {

/**
 * Flat INI-style key/value configuration (`[section]` headers, `key = value`,
 * `#` or `;` comments). Keys are addressed as "section.key". Every getter marks
 * its key as known so that reject_unknown() can flag typos.
 */
class ConfigFile {
 public:
  static ConfigFile load(const std::filesystem::path& path);
  static ConfigFile parse(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Whitespace-separated list of exactly `n` numbers.
  Eigen::VectorXd get_vector(const std::string& key, int n, const Eigen::VectorXd& fallback) const;

  /// Throws ConfigError naming every key that no getter asked for.
  void reject_unknown() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> known_;
};

/// Serializes sections in insertion order as `[section]` / `key = value` lines.
class ConfigWriter {
 public:
  void set(const std::string& section, const std::string& key, const std::string& value);
  void set(const std::string& section, const std::string& key, double value);
  std::string str() const;

 private:
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections_;
};

std::string format_double(double value);

}  // namespace vio
