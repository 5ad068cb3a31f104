#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pccal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Valid values of the `study.selector` setting.
inline const std::vector<std::string> kStudySelectors = {"aggregation", "subsample"};

struct Options {
  std::string command;
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool dry_run = false;
};

/// Runs one command. Validation happens before any output is written; a
/// ValidationError returns 2 with an error record on stderr, a
/// NumericalError returns 3 and also writes error.json to the output directory.
int run(const Options& options);

/// Parses argv (commands emulate, calibrate, study, cv, project) and calls run().
int main_entry(int argc, char** argv);

}  // namespace pccal::cli
