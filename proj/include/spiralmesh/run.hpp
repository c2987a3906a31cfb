#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiralmesh/config.hpp"

namespace spiralmesh {

/// Everything a run needs before the model exists: template, hierarchy,
/// data, split and architecture. Deterministic in the config.
struct PreparedRun {
  RunConfig config;
  SyntheticShapeSet set;
  Split split;
  std::vector<DecimationLevel> levels;
  ModelSpec spec;
  std::optional<ShapeNormalization> normalization;  // autoencode only
  nlohmann::json inputs = nlohmann::json::object();  // path -> content hash
};

PreparedRun prepare_run(const RunConfig& config, int threads = 1);

/// Hex SHA-1 of "blob <size>\0<content>", as git hashes file contents.
std::string git_blob_hash(const std::string& content);
std::string git_blob_hash_file(const std::filesystem::path& path);

/// Trains the configured task and writes checkpoint.{json,bin},
/// metrics.csv, manifest.json and a task-specific report (curve.csv for
/// correspondence, classes.csv for classify) into config.output_dir.
/// Progress goes to `log`. Returns the final metrics.
nlohmann::json train_run(const RunConfig& config, std::ostream& log, int threads = 1,
                         const std::optional<std::filesystem::path>& config_file = {});

/// Evaluates a checkpoint on split "train", "test" or "all", prints the task
/// metric to `out` and, for correspondence, writes eval_<split>_curve.csv
/// into config.output_dir. The checkpoint's model spec must equal the one
/// derived from `config` (ShapeError otherwise).
nlohmann::json eval_run(const RunConfig& config, const std::filesystem::path& checkpoint,
                        const std::string& split, std::ostream& out, int threads = 1);

}  // namespace spiralmesh
