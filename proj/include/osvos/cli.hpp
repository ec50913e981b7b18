#pragma once

// Run configuration for the command-line tool: a flat `key = value` text
// format with [sections], validation that reports every problem at once, and
// the JSON echo written into run manifests.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "osvos/protocol.hpp"

namespace osvos::cli {

/// Everything a run needs. Defaults match protocol::ExperimentConfig.
///
/// Sections and keys (all optional):
///   [data]      root (existing dataset directory), n_train, n_val, frame_size, num_frames
///   [run]       seed, workers, out
///   [arch]      widths (comma separated)
///   [parent]    learning_rate, momentum, iterations, pos_weight (balanced|fixed),
///               fixed_pos_weight, contour_weight
///   [oneshot]   same keys as [parent]
///   [snap]      contour_threshold, majority
///   [eval]      tau, contour_tolerance (<= 0: default for the frame size), error_distance
///   [experiments] budget_fraction, refine_max_n, refine_all, timing_grid (comma separated)
struct RunConfig {
  std::optional<std::filesystem::path> dataset_root;
  std::filesystem::path out;
  protocol::ExperimentConfig experiment;
};

struct ConfigResult {
  std::optional<RunConfig> config;  ///< set iff errors is empty
  std::vector<std::string> errors;  ///< every problem: parse errors in file order, then range checks
};

/// Parses and validates config text. Relative paths resolve against `base_dir`.
ConfigResult parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

/// Reads `path` and calls parse_config. Throws osvos::IoError if unreadable.
ConfigResult validate_config(const std::filesystem::path& path);

/// Checks ranges on an already populated config (used after flag overrides).
std::vector<std::string> check_config(const RunConfig& config);

/// Fully resolved config, defaults included.
nlohmann::ordered_json to_json(const RunConfig& config);

}  // namespace osvos::cli
