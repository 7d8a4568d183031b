#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace cubsde::cli {

/// Raised for anything wrong with the configuration: unreadable file, syntax
/// errors, unknown sections or keys, missing required keys, values that do
/// not parse or violate an invariant.  Mapped to exit code 2 in main.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat INI-style file: [section] headers, key = value lines, # comments.
/// Every key a command reads is declared up front; anything else in the file
/// is a ConfigError, so typos fail loudly instead of silently using defaults.
class Config {
 public:
  static Config parse_file(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;

  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;

  long long get_int(const std::string& section, const std::string& key) const;
  long long get_int(const std::string& section, const std::string& key,
                    long long fallback) const;

  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;

  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;

  /// Whitespace-separated lists.
  std::vector<double> get_double_list(const std::string& section,
                                      const std::string& key) const;
  std::vector<int> get_int_list(const std::string& section,
                                const std::string& key) const;

  /// Rows separated by ';', entries by whitespace.
  std::vector<std::vector<double>> get_matrix(const std::string& section,
                                              const std::string& key) const;

  /// Value must be one of `allowed`; returns its index.
  int get_enum(const std::string& section, const std::string& key,
               const std::vector<std::string>& allowed,
               const std::string& fallback) const;

  /// Declares the full shape a command accepts: every (section, key) present
  /// in the file must appear here.  Call after all reads, before running.
  void restrict_to(
      const std::map<std::string, std::set<std::string>>& allowed) const;

 private:
  std::string raw(const std::string& section, const std::string& key) const;
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string path_;
};

}  // namespace cubsde::cli
