// Single-binary command-line driver: experiment, train, generate, perturb and
// theory subcommands. Exit codes: 0 ok, 1 runtime failure, 2 usage/config.
#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace perturblm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Master seed precedence: --seed flag, then PERTURBLM_SEED, then the config.
std::uint64_t resolve_seed(std::uint64_t config_seed, const std::optional<std::uint64_t>& flag_seed);

}  // namespace perturblm
