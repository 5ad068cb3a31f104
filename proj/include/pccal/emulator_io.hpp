#pragma once

#include <filesystem>

#include "pccal/emulator.hpp"

namespace pccal {

inline constexpr int kEmulatorFormatVersion = 1;

/// Writes `manifest.json` (format version, names, eigenvalues, explained
/// fraction, hyperparameters) plus `K_y.csv`, `scores.csv`, `thetas.csv` and
/// `column_means.csv` into `dir`. Component factorizations are rebuilt on load.
void save_emulator(const std::filesystem::path& dir, const PcEmulator& emulator);

/// Throws ValidationError on a missing file, a version mismatch or
/// inconsistent shapes.
PcEmulator load_emulator(const std::filesystem::path& dir);

}  // namespace pccal
