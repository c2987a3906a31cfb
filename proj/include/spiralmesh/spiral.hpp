#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "spiralmesh/mesh.hpp"

namespace spiralmesh {

/// Marks spiral slots past the end of an exhausted connected component.
inline constexpr Index kSentinel = -1;

using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-vertex fixed-length spiral sequences, one row per vertex.
struct SpiralTable {
  IndexMatrix indices;
  int length = 0;
  int dilation = 1;
  std::uint64_t topology_hash = 0;

  Index vertex_count() const { return static_cast<Index>(indices.rows()); }
  bool operator==(const SpiralTable&) const = default;
};

/// FNV-1a 64 over the face list (each index as 4 little-endian bytes).
std::uint64_t topology_hash(const TriangleMesh& mesh);

/// Spiral of `length` entries around v.
///
/// Entry 0 is v, followed by its one-ring counter-clockwise from the
/// smallest-index neighbor (fan order for boundary vertices). Each further
/// ring is produced by visiting the previous ring in order and, around each
/// of its vertices, walking counter-clockwise from the end of the run of
/// already-visited neighbors, appending every vertex not yet in the spiral.
/// The last ring is truncated; slots past the component are kSentinel.
std::vector<Index> build_spiral(const TriangleMesh& mesh, Index v, int length);

/// Row v is every `dilation`-th entry (offset 0 first) of the length*dilation
/// spiral of v. Rows are independent, so threads only changes the schedule.
SpiralTable build_spiral_table(const TriangleMesh& mesh, int length, int dilation = 1,
                               int threads = 1);

/// Text format: `spiral <n> <length> <dilation> <hash-hex>` then n rows.
void write_spiral_table(std::ostream& out, const SpiralTable& table);
SpiralTable read_spiral_table(std::istream& in, std::string_view source = "<stream>");

void save_spiral_table(const SpiralTable& table, const std::filesystem::path& path);
SpiralTable load_spiral_table(const std::filesystem::path& path);
/// As above, and throws StaleTableError unless the table matches `mesh`.
SpiralTable load_spiral_table(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace spiralmesh
