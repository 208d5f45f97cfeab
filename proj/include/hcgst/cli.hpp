// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hcgst {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point for `hcgst <command> ...`; returns the process exit code.
int run_cli(int argc, char** argv);

/// Flat CSV files derived from run documents (as written to run_*.json).
void write_stages_csv(const std::vector<nlohmann::json>& runs, const std::filesystem::path& path);
void write_bins_csv(const std::vector<nlohmann::json>& runs, const std::filesystem::path& path);
/// One row per variant: mean and sample stdev of ACC, TPV, NPV, PPV across seeds.
void write_aggregate_csv(const std::vector<nlohmann::json>& runs, const std::filesystem::path& path);

/// Default sensitivity grid for lambda_s, lambda_d or delta_h.
std::vector<double> default_sweep_grid(const std::string& param);

}  // namespace hcgst
