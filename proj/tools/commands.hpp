#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace fairaudit::cli {

/// Command-line overrides shared by every subcommand.
struct RunOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> jobs;
};

// Each command returns the process exit status: 0 on success, otherwise the
// error category (1 config, 2 data, 3 estimation). Diagnostics go to `err`,
// short progress summaries to `log`.
int cmd_audit(const RunOptions& options, std::ostream& log, std::ostream& err);
int cmd_diagnose(const RunOptions& options, std::ostream& log, std::ostream& err);
int cmd_sensitivity(const RunOptions& options, std::ostream& log, std::ostream& err);
int cmd_match(const RunOptions& options, std::ostream& log, std::ostream& err);
/// `config` is a scenario spec, `out` the dataset path.
int cmd_simulate(const RunOptions& options, std::ostream& log, std::ostream& err);

}  // namespace fairaudit::cli
