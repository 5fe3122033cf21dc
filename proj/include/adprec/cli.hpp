#pragma once

#include <string>
#include <vector>

namespace adprec {

enum ExitCode : int { kExitOk = 0, kExitAuditFailure = 1, kExitConfig = 2, kExitNumerical = 3 };

/// Shortest text that round-trips: 17 significant digits, '.' separator,
/// independent of the global locale.
[[nodiscard]] std::string format_double(double x);

[[nodiscard]] int cmd_run(const std::string& config_path, const std::string& out_dir);
[[nodiscard]] int cmd_audit(const std::string& suite, std::size_t trials, std::uint64_t seed,
                            const std::string& out_dir);
[[nodiscard]] int cmd_sweep(const std::string& config_path, const std::vector<double>& alphas,
                            const std::string& out_dir);

/// Parses "0.5,1,2" (empty string → empty list). Throws InvalidConfig.
[[nodiscard]] std::vector<double> parse_alpha_list(const std::string& text);

int cli_main(int argc, char** argv);

} // namespace adprec
