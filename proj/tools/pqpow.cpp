// pqpow: bounds sweeps, comparison tables, protocol simulations and the
// recording-oracle verification suite. See README.md for config keys.

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "pqpow/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  std::optional<unsigned> jobs;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "key = value config file")->envname("PQPOW_CONFIG");
  sub->add_option("--seed", f.seed, "base seed")->envname("PQPOW_SEED");
  sub->add_option("--trials", f.trials, "Monte Carlo trials")->envname("PQPOW_TRIALS");
  sub->add_option("--jobs", f.jobs, "worker threads (0: OpenMP default)")->envname("PQPOW_JOBS");
  sub->add_option("--out", f.out, "write the report here instead of stdout")->envname("PQPOW_OUT");
  sub->add_option("--format", f.format, "json, csv or text (command dependent)")->envname("PQPOW_FORMAT");
  sub->add_option("--set", f.overrides, "override a config key: --set key=value");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace pqpow::cli;
  CLI::App app{"post-quantum proof-of-work bounds and simulations"};
  app.require_subcommand(1);
  Flags flags;
  const char* names[] = {"bounds", "compare", "simulate", "verify-oracle"};
  const char* help[] = {"sweep the query bounds over a grid", "classical vs quantum comparison tables",
                        "Monte Carlo protocol executions", "numerical lemma checks on the recording oracle"};
  for (int i = 0; i < 4; ++i) add_common(app.add_subcommand(names[i], help[i]), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigInvalid;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  GlobalOptions opts;
  CommandResult result;
  try {
    ConfigFile config = flags.config.empty() ? ConfigFile{} : ConfigFile::load(flags.config);
    for (const std::string& kv : flags.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    // Flag or environment first, then the config file, then the default.
    const std::uint64_t seed = config.count("seed", 0);
    const std::uint64_t trials = config.count("trials", 1);
    const auto jobs = static_cast<unsigned>(config.count("jobs", 0));
    const std::string out = config.text("out", "");
    const std::string format = config.text("format", "");
    opts.seed = flags.seed.value_or(seed);
    opts.trials = flags.trials.value_or(trials);
    opts.jobs = flags.jobs.value_or(jobs);
    opts.out = flags.out.value_or(out);
    opts.format = flags.format.value_or(format);
    result = run_command(command, config, opts);
  } catch (const ConfigError& e) {
    result = {kConfigInvalid, "", std::string("invalid configuration: ") + e.what()};
  }
  return emit(result, opts, std::cout, std::cerr);
}
