#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include <json.hpp>

#include "spiralmesh/autodiff.hpp"

namespace spiralmesh {

struct CheckpointInfo {
  std::uint64_t seed = 0;
  int epoch = 0;
  double lr = 0.0;
  /// Free-form metadata stored verbatim (model spec, task, ...).
  nlohmann::json extra = nlohmann::json::object();
};

/// Writes `<stem>.json` (names, shapes, step counts, info) and `<stem>.bin`:
/// little-endian float64 values of every parameter, then every adam_m, then
/// every adam_v, each group in manifest order.
void save_checkpoint(const std::filesystem::path& stem, std::span<const Parameter> params,
                     const CheckpointInfo& info);

/// Restores values and Adam state into `params`, whose names and shapes must
/// match the manifest (ShapeError otherwise). Truncated or oversized blobs
/// raise CheckpointError with the byte counts.
CheckpointInfo load_checkpoint(const std::filesystem::path& stem, std::span<Parameter> params);

/// Manifest path for a stem, accepting either the stem or the .json file.
std::filesystem::path checkpoint_stem(const std::filesystem::path& path);

}  // namespace spiralmesh
