#pragma once

#include <filesystem>
#include <vector>

namespace mir3 {

/// Regularization-sweep curves (cooperative and attacked vs log-lambda) with
/// confidence whiskers. Expects the sweep CSV schema.
void plot_ablation(const std::filesystem::path& csv, const std::filesystem::path& svg);

/// One bar per aggregate row of the given eval CSVs, with CI whiskers.
void plot_eval_bars(const std::vector<std::filesystem::path>& csvs,
                    const std::filesystem::path& svg);

/// Agent paths of one trajectory CSV inside the arena box; final positions
/// are marked with a star.
void plot_trajectory(const std::filesystem::path& csv, const std::filesystem::path& svg);

}  // namespace mir3
