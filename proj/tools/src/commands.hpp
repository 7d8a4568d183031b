#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "config.hpp"

namespace cubsde::cli {

/// Options shared by every subcommand.  Overrides are applied on top of the
/// config file when set.
struct CommonOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

// Each returns the process exit code: 0 pass, 1 criterion failed.
// Configuration problems surface as ConfigError (exit 2 in main).
int cmd_verify_formula(const Config& cfg, const CommonOptions& opt);
int cmd_heston(const Config& cfg, const CommonOptions& opt);
int cmd_stability(const Config& cfg, const CommonOptions& opt);
int cmd_local_order(const Config& cfg, const CommonOptions& opt);
int cmd_graded(const Config& cfg, const CommonOptions& opt);
int cmd_spde(const Config& cfg, const CommonOptions& opt);

}  // namespace cubsde::cli
