#include "vio/common/config.hpp"

#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "vio/common/error.hpp"

namespace vio {
namespace {

void flatten(const boost::property_tree::ptree& tree, const std::string& prefix,
             std::map<std::string, std::string>& out) {
  for (const auto& [key, child] : tree) {
    const std::string full = prefix.empty() ? key : prefix + "." + key;
    if (child.empty()) {
      out[full] = child.data();
    } else {
      flatten(child, full, out);
    }
  }
}

}  // namespace

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::ConfigError, "cannot open config file " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

ConfigFile ConfigFile::parse(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  ConfigFile cfg;
  flatten(tree, "", cfg.values_);
  return cfg;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  known_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  known_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (it->second.find_first_not_of(" \t", pos) != std::string::npos) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "key '" + key + "' expects a number, got '" + it->second + "'");
  }
}

int ConfigFile::get_int(const std::string& key, int fallback) const {
  const double v = get_double(key, fallback);
  if (v != static_cast<int>(v)) {
    throw Error(ErrorCode::ConfigError, "key '" + key + "' expects an integer");
  }
  return static_cast<int>(v);
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  const std::string v = get_string(key, fallback ? "true" : "false");
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::ConfigError, "key '" + key + "' expects a boolean, got '" + v + "'");
}

Eigen::VectorXd ConfigFile::get_vector(const std::string& key, int n, const Eigen::VectorXd& fallback) const {
  known_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::istringstream in(it->second);
  std::vector<double> parsed;
  std::string token;
  while (in >> token) {
    try {
      parsed.push_back(std::stod(token));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "key '" + key + "' has a non-numeric entry '" + token + "'");
    }
  }
  if (static_cast<int>(parsed.size()) != n) {
    throw Error(ErrorCode::ConfigError,
                "key '" + key + "' expects " + std::to_string(n) + " numbers, got " + std::to_string(parsed.size()));
  }
  return Eigen::Map<Eigen::VectorXd>(parsed.data(), n);
}

void ConfigFile::reject_unknown() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (!known_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) {
    throw Error(ErrorCode::ConfigError, "unknown config keys: " + unknown);
  }
}

void ConfigWriter::set(const std::string& section, const std::string& key, const std::string& value) {
  for (auto& [name, entries] : sections_) {
    if (name == section) {
      entries.emplace_back(key, value);
      return;
    }
  }
  sections_.push_back({section, {{key, value}}});
}

void ConfigWriter::set(const std::string& section, const std::string& key, double value) {
  set(section, key, format_double(value));
}

std::string ConfigWriter::str() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [name, entries] : sections_) {
    if (!first) out << "\n";
    first = false;
    out << "[" << name << "]\n";
    for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
  }
  return out.str();
}

std::string format_double(double value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

}  // namespace vio
