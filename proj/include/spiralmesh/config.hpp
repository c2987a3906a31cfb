#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiralmesh/metrics.hpp"
#include "spiralmesh/train.hpp"

namespace spiralmesh {

enum class Task { Correspondence, Classify, Autoencode };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

/// Synthetic data. For classification `samples` and `test_samples` count
/// per class.
struct SyntheticConfig {
  int subdivisions = 2;  // icosphere template when no mesh is given
  int samples = 10;
  int test_samples = 2;
  double amplitude = 0.1;
  int classes = 6;
  std::uint64_t seed = 0;
};

struct RunConfig {
  Task task = Task::Correspondence;
  std::optional<std::filesystem::path> mesh;       // template mesh (OBJ/OFF)
  std::optional<std::filesystem::path> hierarchy;  // precomputed manifest
  SyntheticConfig synthetic;
  std::vector<double> pool_factors;
  int width_divisor = 1;
  int latent = 16;
  DiameterEstimate diameter = DiameterEstimate::Geodesic;
  TrainConfig train;
  std::filesystem::path output_dir = "run";
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise
/// ConfigError with the JSON path of the field. Defaults depend on the task.
/// Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Reads and parses a config file; relative paths resolve against its directory.
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& config);

}  // namespace spiralmesh
