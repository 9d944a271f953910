#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace anisoflow::cli {

/// Exit codes of `run`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitFailure = 2;

struct Request {
    std::string command;  ///< simulate, optimize, verify-energy, study-tau, study-bounds, study-lipschitz, study-control
    std::filesystem::path config;
    std::vector<std::string> overrides;  ///< section.key=value
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
};

[[nodiscard]] const std::vector<std::string>& commands();

/// Runs one command. Progress goes to `log`, errors and warnings to `err`.
int run(const Request& request, std::ostream& log, std::ostream& err);

}  // namespace anisoflow::cli
