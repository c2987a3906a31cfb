#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace spiralmesh {

using Index = std::int32_t;
using Face = std::array<Index, 3>;

/// n x 3 vertex positions, one row per vertex.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Immutable triangle mesh with derived adjacency.
///
/// Faces keep the winding they were constructed with; counter-clockwise
/// neighbor order everywhere in the library is defined by that winding.
/// Construction rejects out-of-range and repeated indices but accepts
/// non-manifold, duplicate and zero-area faces (see validate()).
class TriangleMesh {
 public:
  TriangleMesh() = default;
  TriangleMesh(Points positions, std::vector<Face> faces);

  Index vertex_count() const { return static_cast<Index>(positions_.rows()); }
  Index face_count() const { return static_cast<Index>(faces_.size()); }

  const Points& positions() const { return positions_; }
  Eigen::Vector3d position(Index v) const { return positions_.row(v).transpose(); }
  const std::vector<Face>& faces() const { return faces_; }

  /// Sorted, deduplicated neighbor indices.
  std::span<const Index> neighbors(Index v) const { return adjacency_[v]; }
  std::span<const Index> incident_faces(Index v) const { return incident_[v]; }

  /// Same connectivity, new positions (must have vertex_count rows).
  TriangleMesh with_positions(Points positions) const;

 private:
  Points positions_;
  std::vector<Face> faces_;
  std::vector<std::vector<Index>> adjacency_;
  std::vector<std::vector<Index>> incident_;
};

struct ValidationReport {
  bool is_edge_manifold = true;
  int boundary_edge_count = 0;
  std::vector<std::pair<Index, Index>> non_manifold_edges;
  /// Edges whose two faces traverse them in the same direction.
  std::vector<std::pair<Index, Index>> inconsistent_winding_pairs;
  int connected_components = 0;
  std::vector<Index> duplicate_faces;
  std::vector<Index> zero_area_faces;
  /// Vertices whose face fan is not a single cycle or path.
  std::vector<Index> non_manifold_vertices;
};

ValidationReport validate(const TriangleMesh& mesh);

/// Neighbors of v in the cyclic order induced by face winding.
///
/// Interior vertices: the closed cycle, rotated to start at the
/// smallest-index neighbor. Boundary vertices: the open fan, which can only
/// be walked counter-clockwise from the one neighbor that no face of v
/// enters. Throws TopologyError when the fan is neither one cycle nor one path.
std::vector<Index> one_ring_ordered(const TriangleMesh& mesh, Index v);

/// BFS layer k around v, sorted. Empty once the component is exhausted.
std::vector<Index> k_ring(const TriangleMesh& mesh, Index v, int k);

/// BFS layer of every vertex (-1 when unreachable).
std::vector<int> bfs_layers(const TriangleMesh& mesh, Index source);

/// Dijkstra over the edge graph with Euclidean edge lengths;
/// unreachable vertices get +infinity.
std::vector<double> geodesic_distances(const TriangleMesh& mesh, Index source);

double bounding_box_diagonal(const TriangleMesh& mesh);

/// Largest finite graph-geodesic distance seen from up to `samples`
/// evenly spaced source vertices.
double estimate_geodesic_diameter(const TriangleMesh& mesh, int samples = 16);

// --- file I/O -------------------------------------------------------------

enum class MeshFormat { Obj, Off };

/// Deduces the format from the extension (.obj / .off, case-insensitive).
MeshFormat mesh_format_for(const std::filesystem::path& path);

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
TriangleMesh load_mesh(const std::filesystem::path& path);
TriangleMesh read_mesh(std::istream& in, MeshFormat format, std::string_view source = "<stream>");

/// OFF output with shortest round-trip coordinates, so load(save(m)) == m.
void write_off(std::ostream& out, const TriangleMesh& mesh);
void save_off(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace spiralmesh
