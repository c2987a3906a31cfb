#include "spiralmesh/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <string>

#include "spiralmesh/error.hpp"
#include "spiralmesh/geometry.hpp"

namespace spiralmesh {

TriangleMesh::TriangleMesh(Points positions, std::vector<Face> faces)
    : positions_(std::move(positions)), faces_(std::move(faces)) {
  const Index n = vertex_count();
  adjacency_.resize(n);
  incident_.resize(n);
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& face = faces_[f];
    for (Index k = 0; k < 3; ++k) {
      if (face[k] < 0 || face[k] >= n)
        throw Error("face " + std::to_string(f) + " references vertex " +
                    std::to_string(face[k]) + " of " + std::to_string(n));
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
      throw Error("face " + std::to_string(f) + " repeats a vertex");
    for (Index k = 0; k < 3; ++k) {
      const Index a = face[k], b = face[(k + 1) % 3];
      adjacency_[a].push_back(b);
      adjacency_[b].push_back(a);
      incident_[a].push_back(static_cast<Index>(f));
    }
  }
  for (auto& list : adjacency_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
}

TriangleMesh TriangleMesh::with_positions(Points positions) const {
  if (positions.rows() != positions_.rows())
    throw ShapeError("with_positions: expected " + std::to_string(positions_.rows()) +
                     " vertices, got " + std::to_string(positions.rows()));
  TriangleMesh copy = *this;
  copy.positions_ = std::move(positions);
  return copy;
}

std::vector<Index> one_ring_ordered(const TriangleMesh& mesh, Index v) {
  // Each face (v, a, b) contributes the counter-clockwise step a -> b.
  std::vector<std::pair<Index, Index>> steps;
  for (Index f : mesh.incident_faces(v)) {
    const Face& face = mesh.faces()[f];
    const int k = face[0] == v ? 0 : (face[1] == v ? 1 : 2);
    steps.emplace_back(face[(k + 1) % 3], face[(k + 2) % 3]);
  }
  const auto neighbors = mesh.neighbors(v);
  if (steps.empty()) return {};

  auto next_of = [&](Index a) -> Index {
    for (auto [from, to] : steps)
      if (from == a) return to;
    return -1;
  };
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (std::size_t j = i + 1; j < steps.size(); ++j) {
      if (steps[i].first == steps[j].first || steps[i].second == steps[j].second)
        throw TopologyError(v, "non-manifold umbrella (edge used twice in the same direction)");
    }
  }

  std::vector<Index> heads;
  for (Index n : neighbors) {
    const bool entered = std::any_of(steps.begin(), steps.end(),
                                     [n](const auto& s) { return s.second == n; });
    if (!entered) heads.push_back(n);
  }
  if (heads.size() > 1)
    throw TopologyError(v, "non-manifold umbrella (" + std::to_string(heads.size()) +
                               " separate face fans)");

  std::vector<Index> ring;
  ring.reserve(neighbors.size());
  const Index start = heads.empty() ? neighbors.front() : heads.front();
  Index cur = start;
  while (cur != -1) {
    ring.push_back(cur);
    if (ring.size() > neighbors.size()) break;
    cur = next_of(cur);
    if (cur == start) break;
  }
  if (ring.size() != neighbors.size())
    throw TopologyError(v, "non-manifold umbrella (fan does not reach every neighbor)");
  return ring;
}

std::vector<int> bfs_layers(const TriangleMesh& mesh, Index source) {
  std::vector<int> layer(mesh.vertex_count(), -1);
  std::queue<Index> queue;
  layer[source] = 0;
  queue.push(source);
  while (!queue.empty()) {
    const Index u = queue.front();
    queue.pop();
    for (Index w : mesh.neighbors(u)) {
      if (layer[w] < 0) {
        layer[w] = layer[u] + 1;
        queue.push(w);
      }
    }
  }
  return layer;
}

std::vector<Index> k_ring(const TriangleMesh& mesh, Index v, int k) {
  const auto layer = bfs_layers(mesh, v);
  std::vector<Index> out;
  for (Index i = 0; i < mesh.vertex_count(); ++i)
    if (layer[i] == k) out.push_back(i);
  return out;
}

std::vector<double> geodesic_distances(const TriangleMesh& mesh, Index source) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(mesh.vertex_count(), inf);
  using Item = std::pair<double, Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    const Eigen::Vector3d pu = mesh.position(u);
    for (Index w : mesh.neighbors(u)) {
      const double nd = d + (mesh.position(w) - pu).norm();
      if (nd < dist[w]) {
        dist[w] = nd;
        heap.emplace(nd, w);
      }
    }
  }
  return dist;
}

double bounding_box_diagonal(const TriangleMesh& mesh) {
  if (mesh.vertex_count() == 0) return 0.0;
  const Eigen::RowVector3d lo = mesh.positions().colwise().minCoeff();
  const Eigen::RowVector3d hi = mesh.positions().colwise().maxCoeff();
  return (hi - lo).norm();
}

double estimate_geodesic_diameter(const TriangleMesh& mesh, int samples) {
  const Index n = mesh.vertex_count();
  const Index count = std::min<Index>(n, std::max(samples, 1));
  double best = 0.0;
  for (Index i = 0; i < count; ++i) {
    const Index source = static_cast<Index>(static_cast<std::int64_t>(i) * n / count);
    for (double d : geodesic_distances(mesh, source))
      if (std::isfinite(d)) best = std::max(best, d);
  }
  return best;
}

namespace {

Index find_root(std::vector<Index>& parent, Index x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

ValidationReport validate(const TriangleMesh& mesh) {
  ValidationReport report;

  struct EdgeUse {
    int faces = 0;
    int forward = 0;  // traversals from the smaller to the larger index
  };
  std::map<std::pair<Index, Index>, EdgeUse> edges;
  std::map<std::array<Index, 3>, Index> seen_faces;

  std::vector<Index> parent(mesh.vertex_count());
  std::iota(parent.begin(), parent.end(), 0);

  for (Index f = 0; f < mesh.face_count(); ++f) {
    const Face& face = mesh.faces()[f];
    for (int k = 0; k < 3; ++k) {
      const Index a = face[k], b = face[(k + 1) % 3];
      auto& use = edges[{std::min(a, b), std::max(a, b)}];
      ++use.faces;
      if (a < b) ++use.forward;
      const Index ra = find_root(parent, a), rb = find_root(parent, b);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }

    std::array<Index, 3> key = face;
    std::sort(key.begin(), key.end());
    if (!seen_faces.emplace(key, f).second) report.duplicate_faces.push_back(f);

    const Eigen::Vector3d a = mesh.position(face[0]), b = mesh.position(face[1]),
                          c = mesh.position(face[2]);
    const double scale = std::max({(b - a).squaredNorm(), (c - b).squaredNorm(),
                                   (a - c).squaredNorm()});
    if (triangle_normal(a, b, c).norm() <= 1e-14 * scale) report.zero_area_faces.push_back(f);
  }

  for (const auto& [edge, use] : edges) {
    if (use.faces == 1) ++report.boundary_edge_count;
    if (use.faces > 2) report.non_manifold_edges.push_back(edge);
    if (use.faces == 2 && use.forward != 1) report.inconsistent_winding_pairs.push_back(edge);
  }
  report.is_edge_manifold = report.non_manifold_edges.empty();

  for (Index v = 0; v < mesh.vertex_count(); ++v) {
    if (find_root(parent, v) == v) ++report.connected_components;
    try {
      one_ring_ordered(mesh, v);
    } catch (const TopologyError&) {
      report.non_manifold_vertices.push_back(v);
    }
  }
  return report;
}

}  // namespace spiralmesh
