#include "config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cubsde::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Config cfg;
  cfg.path_ = path;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string at = path + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError(at + ": malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(at + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(at + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(at + ": empty key");
    if (section.empty())
      throw ConfigError(at + ": key '" + key + "' appears before any [section]");
    auto& sec = cfg.sections_[section];
    if (sec.count(key))
      throw ConfigError(at + ": duplicate key '" + key + "' in [" + section + "]");
    sec[key] = value;
  }
  return cfg;
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key) > 0;
}

std::string Config::raw(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  if (it == sections_.end() || !it->second.count(key))
    throw ConfigError(path_ + ": missing required key '" + key + "' in [" +
                      section + "]");
  return it->second.at(key);
}

std::string Config::get_string(const std::string& section,
                               const std::string& key) const {
  return raw(section, key);
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
  return has(section, key) ? raw(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  const std::string v = raw(section, key);
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (errno != 0 || end == v.c_str() || *end != '\0')
    throw ConfigError(path_ + ": [" + section + "] " + key + " = '" + v +
                      "' is not a number");
  return d;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

long long Config::get_int(const std::string& section, const std::string& key) const {
  const std::string v = raw(section, key);
  char* end = nullptr;
  errno = 0;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (errno != 0 || end == v.c_str() || *end != '\0')
    throw ConfigError(path_ + ": [" + section + "] " + key + " = '" + v +
                      "' is not an integer");
  return i;
}

long long Config::get_int(const std::string& section, const std::string& key,
                          long long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key,
                              std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = raw(section, key);
  char* end = nullptr;
  errno = 0;
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || end == v.c_str() || *end != '\0' || v.front() == '-')
    throw ConfigError(path_ + ": [" + section + "] " + key + " = '" + v +
                      "' is not an unsigned integer");
  return u;
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = raw(section, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(path_ + ": [" + section + "] " + key + " = '" + v +
                    "' is not a boolean");
}

std::vector<double> Config::get_double_list(const std::string& section,
                                            const std::string& key) const {
  std::istringstream ss(raw(section, key));
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    char* end = nullptr;
    errno = 0;
    const double d = std::strtod(tok.c_str(), &end);
    if (errno != 0 || end == tok.c_str() || *end != '\0')
      throw ConfigError(path_ + ": [" + section + "] " + key + ": '" + tok +
                        "' is not a number");
    out.push_back(d);
  }
  if (out.empty())
    throw ConfigError(path_ + ": [" + section + "] " + key + " is an empty list");
  return out;
}

std::vector<int> Config::get_int_list(const std::string& section,
                                      const std::string& key) const {
  std::vector<int> out;
  for (const double d : get_double_list(section, key)) {
    const int i = static_cast<int>(d);
    if (double(i) != d)
      throw ConfigError(path_ + ": [" + section + "] " + key +
                        " must be a list of integers");
    out.push_back(i);
  }
  return out;
}

std::vector<std::vector<double>> Config::get_matrix(const std::string& section,
                                                    const std::string& key) const {
  const std::string v = raw(section, key);
  std::vector<std::vector<double>> rows;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto semi = v.find(';', start);
    const std::string part =
        v.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
    std::istringstream ss(part);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      char* end = nullptr;
      errno = 0;
      const double d = std::strtod(tok.c_str(), &end);
      if (errno != 0 || end == tok.c_str() || *end != '\0')
        throw ConfigError(path_ + ": [" + section + "] " + key + ": '" + tok +
                          "' is not a number");
      row.push_back(d);
    }
    if (!row.empty()) rows.push_back(std::move(row));
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  if (rows.empty())
    throw ConfigError(path_ + ": [" + section + "] " + key + " is an empty matrix");
  return rows;
}

int Config::get_enum(const std::string& section, const std::string& key,
                     const std::vector<std::string>& allowed,
                     const std::string& fallback) const {
  const std::string v = has(section, key) ? raw(section, key) : fallback;
  for (std::size_t i = 0; i < allowed.size(); ++i)
    if (allowed[i] == v) return static_cast<int>(i);
  std::string opts;
  for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
  throw ConfigError(path_ + ": [" + section + "] " + key + " = '" + v +
                    "' (expected one of: " + opts + ")");
}

void Config::restrict_to(
    const std::map<std::string, std::set<std::string>>& allowed) const {
  for (const auto& [section, keys] : sections_) {
    const auto it = allowed.find(section);
    if (it == allowed.end())
      throw ConfigError(path_ + ": unknown section [" + section + "]");
    for (const auto& [key, value] : keys)
      if (!it->second.count(key))
        throw ConfigError(path_ + ": unknown key '" + key + "' in [" + section +
                          "]");
  }
}

}  // namespace cubsde::cli
