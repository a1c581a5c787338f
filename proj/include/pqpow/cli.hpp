#pragma once

// Command layer behind the `pqpow` executable. Each command reads a flat
// key/value config, writes one machine-readable report and returns the
// process exit code.
//
// Config format: one `key = value` per line, `#` starts a comment, blank
// lines ignored, keys are case-sensitive, a repeated key is an error.
// Unknown keys are rejected.
//
// Grid values (bounds sweeps, verify grids) are comma-separated lists whose
// elements are a number, an integer range `a:b` or `a:b:step` (inclusive),
// or `2^-e` where e may itself be a range (`2^-2:10` = 2^-2, ..., 2^-10).

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pqpow::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kViolation = 1, kConfigInvalid = 2, kResource = 3 };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text);
  static ConfigFile load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  // Accessors mark the key as consumed, present or not.
  std::optional<std::string> raw(const std::string& key);
  std::string text(const std::string& key, const std::string& fallback);
  std::uint64_t count(const std::string& key, std::uint64_t fallback);
  std::optional<std::uint64_t> count(const std::string& key);
  double real(const std::string& key, double fallback);
  std::optional<double> real(const std::string& key);
  bool flag(const std::string& key, bool fallback);
  std::vector<double> real_grid(const std::string& key, const std::string& fallback);
  std::vector<std::uint64_t> count_grid(const std::string& key, const std::string& fallback);
  std::vector<std::string> list(const std::string& key, const std::string& fallback);

  // Throws ConfigError naming the first key no accessor asked for.
  void reject_unknown() const;

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

double parse_real(const std::string& s);
std::uint64_t parse_count(const std::string& s);
std::vector<double> parse_real_grid(const std::string& s);
std::vector<std::uint64_t> parse_count_grid(const std::string& s);

// Resolved global options; flags override environment, which overrides the
// config file.
struct GlobalOptions {
  std::uint64_t seed = 0;
  std::uint64_t trials = 1;
  unsigned jobs = 0;          // 0: OpenMP default
  std::string out;            // empty: stdout
  std::string format;         // empty: command default
};

struct CommandResult {
  int exit_code = kOk;
  std::string output;   // report body
  std::string message;  // one-line summary for stderr
};

CommandResult cmd_bounds(ConfigFile& config, const GlobalOptions& opts);
CommandResult cmd_compare(ConfigFile& config, const GlobalOptions& opts);
CommandResult cmd_simulate(ConfigFile& config, const GlobalOptions& opts);
CommandResult cmd_verify_oracle(ConfigFile& config, const GlobalOptions& opts);

// Dispatches by name and maps exceptions to exit codes (2 for configuration
// and precondition errors, 3 for resource limits).
CommandResult run_command(const std::string& name, ConfigFile& config, const GlobalOptions& opts);

// Writes result.output to opts.out or `out`, the message to `err`.
int emit(const CommandResult& result, const GlobalOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace pqpow::cli
