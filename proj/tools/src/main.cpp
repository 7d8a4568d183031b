#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"

namespace {

using CommandFn = int (*)(const cubsde::cli::Config&,
                          const cubsde::cli::CommonOptions&);

struct CommandSpec {
  const char* name;
  const char* desc;
  CommandFn fn;
};

constexpr CommandSpec kCommands[] = {
    {"verify-formula",
     "Check the moment-matching conditions and weak symmetry of a cubature "
     "formula",
     cubsde::cli::cmd_verify_formula},
    {"heston", "Moment convergence of the composed scheme for the log-price "
               "Heston model",
     cubsde::cli::cmd_heston},
    {"stability", "Probe the weighted one-step growth bound on a state grid",
     cubsde::cli::cmd_stability},
    {"local-order",
     "Measure the defect of one cubature step against the generator expansion",
     cubsde::cli::cmd_local_order},
    {"graded", "Compare uniform and graded meshes under a nonsmooth payoff",
     cubsde::cli::cmd_graded},
    {"spde", "Mesh convergence for a spectrally truncated dissipative equation",
     cubsde::cli::cmd_spde},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak approximation of diffusions by cubature on Wiener space"};
  app.require_subcommand(1);

  cubsde::cli::CommonOptions opt;
  for (const auto& spec : kCommands) {
    auto* sub = app.add_subcommand(spec.name, spec.desc);
    sub->add_option("--config", opt.config_path, "Experiment configuration file")
        ->required();
    sub->add_option("--out", opt.out_dir,
                    "Directory for reports and CSV output (default: .)");
    sub->add_option("--threads", opt.threads,
                    "Worker threads, overrides [eval] threads");
    sub->add_option("--seed", opt.seed, "RNG seed, overrides [eval] seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CommandFn fn = nullptr;
  for (const auto* sub : app.get_subcommands())
    for (const auto& spec : kCommands)
      if (sub->get_name() == spec.name) fn = spec.fn;
  if (!fn) return 2;

  try {
    const auto cfg = cubsde::cli::Config::parse_file(opt.config_path);
    return fn(cfg, opt);
  } catch (const cubsde::cli::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
