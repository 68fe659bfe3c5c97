#pragma once

#include <optional>
#include <string>

namespace rsgd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

// Name of the environment variable overriding the output root.
inline constexpr const char* kOutputRootEnv = "RSGD_OUT_ROOT";

struct CliOptions {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool force = false;
};

// Subcommand entry points; they print to stdout/stderr and return the exit
// code (0 ok, 1 check failure, 2 config error, 3 numeric failure).
int cmd_run(const CliOptions& opts);
int cmd_sweep(const CliOptions& opts);
int cmd_check(const CliOptions& opts);
int cmd_gen(const CliOptions& opts);

}  // namespace rsgd
