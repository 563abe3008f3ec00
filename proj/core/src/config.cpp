#include "hmamba/config.hpp"
#include "hmamba/errors.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hmamba {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() { kv_["config_version"] = std::to_string(kVersion); }

RunConfig RunConfig::from_file(const std::string& path) {
  RunConfig c;
  c.merge_file(path);
  return c;
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
    }
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": empty key");
    }
    kv_[key] = value;
  }
  long v = get_int("config_version", kVersion);
  if (v != kVersion) {
    throw std::invalid_argument(path + ": unsupported config_version " + std::to_string(v));
  }
}

void RunConfig::save(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write config file: " + path);
  f << to_string();
  if (!f) throw DataError("config write failed: " + path);
}

std::string RunConfig::to_string() const {
  std::ostringstream out;
  for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
  return out.str();
}

bool RunConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

void RunConfig::set(const std::string& key, const std::string& value) { kv_[key] = value; }

void RunConfig::set_int(const std::string& key, long v) { kv_[key] = std::to_string(v); }

void RunConfig::set_double(const std::string& key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  kv_[key] = buf;
}

std::string RunConfig::get_str(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

long RunConfig::get_int(const std::string& key, long fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  errno = 0;
  char* end = nullptr;
  long v = std::strtol(it->second.c_str(), &end, 10);
  if (errno != 0 || end != it->second.c_str() + it->second.size()) {
    throw std::invalid_argument("config key '" + key + "': not an integer: " + it->second);
  }
  return v;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(it->second.c_str(), &end);
  if (errno != 0 || end != it->second.c_str() + it->second.size()) {
    throw std::invalid_argument("config key '" + key + "': not a number: " + it->second);
  }
  return v;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config key '" + key + "': not a boolean: " + v);
}

std::vector<int> RunConfig::get_int_list(const std::string& key,
                                         const std::vector<int>& fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<int> out;
  std::istringstream in(it->second);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    std::string s = trim(tok);
    if (s.empty()) continue;
    out.push_back(static_cast<int>(std::strtol(s.c_str(), nullptr, 10)));
  }
  if (out.empty()) {
    throw std::invalid_argument("config key '" + key + "': empty integer list");
  }
  return out;
}

}  // namespace hmamba
