/**
 * @file commands.hpp
 * @brief The four quantfolio subcommands and the exit-code contract.
 *
 * Exit codes: 0 success, 2 configuration or usage error, 3 data error,
 * 4 solver failure or infeasible problem, 1 anything unexpected. A command
 * writes nothing unless it completes.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "quantfolio/error.hpp"

namespace quantfolio::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitSolver = 4;

struct Options {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;  ///< overrides the config's seed
    int threads = 1;
};

/// File name -> content, written only after the command has fully succeeded.
using Outputs = std::vector<std::pair<std::string, std::string>>;

Outputs cmd_optimize(const RunConfig& config, const Options& options, std::ostream& log);
Outputs cmd_frontier(const RunConfig& config, const Options& options, std::ostream& log);
Outputs cmd_backtest(const RunConfig& config, const Options& options, std::ostream& log);
Outputs cmd_report(const RunConfig& config, const Options& options, std::ostream& log);

int exit_code(const Error& error);

/// Full command line entry point (argv[0] is the program name).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace quantfolio::cli
