#include "spiralmesh/decimate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <string>
#include <tuple>

#include <Eigen/Dense>
#include <json.hpp>

#include "spiralmesh/error.hpp"
#include "spiralmesh/parallel.hpp"
#include "spiralmesh/spiral.hpp"
#include "spiralmesh/text.hpp"

namespace spiralmesh {

std::vector<Quadric> vertex_quadrics(const TriangleMesh& mesh, int* zero_area_faces) {
  std::vector<Quadric> q(mesh.vertex_count());
  int skipped = 0;
  for (const Face& f : mesh.faces()) {
    const Eigen::Vector4d plane =
        triangle_plane(mesh.position(f[0]), mesh.position(f[1]), mesh.position(f[2]));
    if (plane.isZero()) {
      ++skipped;
      continue;
    }
    const Quadric fq = Quadric::from_plane(plane);
    for (Index v : f) q[v] += fq;
  }
  if (zero_area_faces) *zero_area_faces = skipped;
  return q;
}

CollapseCandidate edge_collapse_cost(const Quadric& qsum, const Eigen::Vector3d& a,
                                     const Eigen::Vector3d& b) {
  const Eigen::Matrix4d& m = qsum.matrix();
  const Eigen::Matrix3d sys = m.topLeftCorner<3, 3>();
  const Eigen::Vector3d rhs = -m.topRightCorner<3, 1>();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(sys, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d lambda = eig.eigenvalues().cwiseAbs();
  const double lo = lambda.minCoeff(), hi = lambda.maxCoeff();
  if (lo > 0.0 && hi / lo < 1e12) {
    const Eigen::Vector3d x = sys.ldlt().solve(rhs);
    if (x.allFinite()) return {std::max(0.0, qsum.error(x)), x};
  }

  const Eigen::Vector3d mid = 0.5 * (a + b);
  CollapseCandidate best{qsum.error(mid), mid};
  for (const Eigen::Vector3d& p : {a, b}) {
    const double e = qsum.error(p);
    if (e < best.cost) best = {e, p};
  }
  best.cost = std::max(0.0, best.cost);
  return best;
}

namespace {

struct QueueEntry {
  double cost;
  Index lo, hi;
  unsigned stamp_lo, stamp_hi;
  Eigen::Vector3d position;
};

struct QueueOrder {
  // priority_queue pops the largest; invert for a min-heap on (cost, lo, hi).
  bool operator()(const QueueEntry& x, const QueueEntry& y) const {
    return std::tie(x.cost, x.lo, x.hi, x.stamp_lo, x.stamp_hi) >
           std::tie(y.cost, y.lo, y.hi, y.stamp_lo, y.stamp_hi);
  }
};

// Mutable connectivity for edge collapse; faces are never reordered.
class CollapseState {
 public:
  explicit CollapseState(const TriangleMesh& mesh)
      : faces_(mesh.faces()),
        face_alive_(mesh.faces().size(), true),
        vertex_faces_(mesh.vertex_count()),
        alive_(mesh.vertex_count(), true),
        stamp_(mesh.vertex_count(), 0),
        alive_count_(mesh.vertex_count()) {
    positions_.reserve(mesh.vertex_count());
    for (Index v = 0; v < mesh.vertex_count(); ++v) positions_.push_back(mesh.position(v));
    for (Index f = 0; f < mesh.face_count(); ++f)
      for (Index v : faces_[f]) vertex_faces_[v].push_back(f);
    quadrics_ = vertex_quadrics(mesh);
    add_boundary_quadrics();
  }

  Index alive_count() const { return alive_count_; }

  std::vector<Index> neighbors(Index v) const {
    std::vector<Index> out;
    for (Index f : vertex_faces_[v]) {
      if (!face_alive_[f]) continue;
      for (Index w : faces_[f])
        if (w != v) out.push_back(w);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  int faces_on_edge(Index a, Index b) const {
    int count = 0;
    for (Index f : vertex_faces_[a])
      if (face_alive_[f] && contains(faces_[f], b)) ++count;
    return count;
  }

  bool is_boundary_vertex(Index v) const {
    for (Index w : neighbors(v))
      if (faces_on_edge(v, w) == 1) return true;
    return false;
  }

  QueueEntry candidate(Index a, Index b) const {
    const Index lo = std::min(a, b), hi = std::max(a, b);
    const CollapseCandidate c =
        edge_collapse_cost(quadrics_[lo] + quadrics_[hi], positions_[lo], positions_[hi]);
    return {c.cost, lo, hi, stamp_[lo], stamp_[hi], c.position};
  }

  bool current(const QueueEntry& e) const {
    return alive_[e.lo] && alive_[e.hi] && stamp_[e.lo] == e.stamp_lo && stamp_[e.hi] == e.stamp_hi;
  }

  bool valid(const QueueEntry& e) const {
    const Index a = e.lo, b = e.hi;
    const int shared = faces_on_edge(a, b);
    if (shared == 0) return false;

    const auto na = neighbors(a), nb = neighbors(b);
    std::vector<Index> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    if (static_cast<int>(common.size()) != shared) return false;
    if (shared == 2 && is_boundary_vertex(a) && is_boundary_vertex(b)) return false;

    for (Index v : {a, b}) {
      for (Index f : vertex_faces_[v]) {
        if (!face_alive_[f] || (contains(faces_[f], a) && contains(faces_[f], b))) continue;
        const Face& face = faces_[f];
        Eigen::Vector3d p[3], q[3];
        for (int k = 0; k < 3; ++k) {
          p[k] = positions_[face[k]];
          q[k] = face[k] == v ? e.position : p[k];
        }
        const Eigen::Vector3d before = triangle_normal(p[0], p[1], p[2]);
        const Eigen::Vector3d after = triangle_normal(q[0], q[1], q[2]);
        if (before.dot(after) < 0.0) return false;
        if (after.norm() <= 1e-12 * before.norm()) return false;
      }
    }
    return true;
  }

  /// Contracts hi into lo; returns the survivor.
  Index collapse(const QueueEntry& e) {
    const Index keep = e.lo, gone = e.hi;
    for (Index f : vertex_faces_[gone]) {
      if (!face_alive_[f]) continue;
      Face& face = faces_[f];
      if (contains(face, keep)) {
        face_alive_[f] = false;
        continue;
      }
      for (Index& v : face)
        if (v == gone) v = keep;
      vertex_faces_[keep].push_back(f);
    }
    vertex_faces_[gone].clear();
    auto& own = vertex_faces_[keep];
    own.erase(std::remove_if(own.begin(), own.end(), [&](Index f) { return !face_alive_[f]; }),
              own.end());
    std::sort(own.begin(), own.end());
    own.erase(std::unique(own.begin(), own.end()), own.end());

    positions_[keep] = e.position;
    quadrics_[keep] += quadrics_[gone];
    alive_[gone] = false;
    ++stamp_[keep];
    --alive_count_;
    return keep;
  }

  std::vector<std::pair<Index, Index>> edges() const {
    std::vector<std::pair<Index, Index>> out;
    for (Index v = 0; v < static_cast<Index>(alive_.size()); ++v) {
      if (!alive_[v]) continue;
      for (Index w : neighbors(v))
        if (v < w) out.emplace_back(v, w);
    }
    return out;
  }

  std::vector<Index> kept() const {
    std::vector<Index> out;
    for (Index v = 0; v < static_cast<Index>(alive_.size()); ++v)
      if (alive_[v]) out.push_back(v);
    return out;
  }

  TriangleMesh coarse_mesh(std::span<const Index> kept) const {
    std::vector<Index> remap(alive_.size(), -1);
    Points pts(static_cast<Eigen::Index>(kept.size()), 3);
    for (std::size_t r = 0; r < kept.size(); ++r) {
      remap[kept[r]] = static_cast<Index>(r);
      pts.row(static_cast<Eigen::Index>(r)) = positions_[kept[r]].transpose();
    }
    std::vector<Face> out;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      const Face& face = faces_[f];
      out.push_back({remap[face[0]], remap[face[1]], remap[face[2]]});
    }
    return TriangleMesh(std::move(pts), std::move(out));
  }

 private:
  static bool contains(const Face& f, Index v) { return f[0] == v || f[1] == v || f[2] == v; }

  void add_boundary_quadrics() {
    std::map<std::pair<Index, Index>, std::pair<int, Index>> use;  // edge -> (faces, last face)
    for (Index f = 0; f < static_cast<Index>(faces_.size()); ++f) {
      for (int k = 0; k < 3; ++k) {
        const Index a = faces_[f][k], b = faces_[f][(k + 1) % 3];
        auto& u = use[{std::min(a, b), std::max(a, b)}];
        ++u.first;
        u.second = f;
      }
    }
    for (const auto& [edge, u] : use) {
      if (u.first != 1) continue;
      const Face& face = faces_[u.second];
      const Eigen::Vector3d n =
          triangle_normal(positions_[face[0]], positions_[face[1]], positions_[face[2]]);
      const Eigen::Vector3d pa = positions_[edge.first], pb = positions_[edge.second];
      Eigen::Vector3d normal = (pb - pa).cross(n);
      const double len = normal.norm();
      if (!(len > 0.0)) continue;
      normal /= len;
      Eigen::Vector4d plane;
      plane << normal, -normal.dot(pa);
      const Quadric q = Quadric::from_plane(plane, kBoundaryQuadricWeight);
      quadrics_[edge.first] += q;
      quadrics_[edge.second] += q;
    }
  }

  std::vector<Face> faces_;
  std::vector<bool> face_alive_;
  std::vector<std::vector<Index>> vertex_faces_;
  std::vector<Eigen::Vector3d> positions_;
  std::vector<Quadric> quadrics_;
  std::vector<bool> alive_;
  std::vector<unsigned> stamp_;
  Index alive_count_;
};

Index target_count(Index n, double factor) {
  return static_cast<Index>(std::ceil(static_cast<double>(n) / factor));
}

}  // namespace

DecimationLevel decimate(const TriangleMesh& mesh, double factor, int threads) {
  if (!(factor > 1.0)) throw Error("decimation factor must exceed 1");
  const Index n = mesh.vertex_count();
  const Index target = target_count(n, factor);
  if (target < 4)
    throw Error("decimation target " + std::to_string(target) + " is below 4 vertices");

  CollapseState state(mesh);
  std::vector<double> costs;
  if (target < n) {
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, QueueOrder> heap;
    auto push_all = [&] {
      for (auto [a, b] : state.edges()) heap.push(state.candidate(a, b));
    };
    push_all();
    std::size_t collapses_since_refill = 0;
    while (state.alive_count() > target) {
      if (heap.empty()) {
        // Rejected edges are only re-examined when their own endpoints
        // change; a refill retries them against the current mesh.
        if (collapses_since_refill == 0) throw DecimationError(state.alive_count(), target);
        collapses_since_refill = 0;
        push_all();
        continue;
      }
      const QueueEntry top = heap.top();
      heap.pop();
      if (!state.current(top) || !state.valid(top)) continue;
      const Index keep = state.collapse(top);
      costs.push_back(top.cost);
      ++collapses_since_refill;
      for (Index w : state.neighbors(keep)) heap.push(state.candidate(keep, w));
    }
  }

  DecimationLevel level;
  level.kept = state.kept();
  level.coarse = state.coarse_mesh(level.kept);
  level.factor = factor;
  level.collapse_costs = std::move(costs);
  std::vector<Triplet> down;
  down.reserve(level.kept.size());
  for (std::size_t r = 0; r < level.kept.size(); ++r)
    down.emplace_back(static_cast<Index>(r), level.kept[r], 1.0);
  level.down = SparseMatrix(level.coarse.vertex_count(), n, down);
  level.up = up_transform(mesh, level.coarse, level.kept, threads);
  return level;
}

SparseMatrix up_transform(const TriangleMesh& fine, const TriangleMesh& coarse,
                          std::span<const Index> kept, int threads) {
  if (coarse.face_count() == 0) throw Error("up_transform: coarse mesh has no faces");
  if (static_cast<Index>(kept.size()) != coarse.vertex_count())
    throw ShapeError("up_transform: kept list does not match coarse vertex count");
  const Index n = fine.vertex_count();
  std::vector<Index> image(n, -1);
  for (std::size_t r = 0; r < kept.size(); ++r) image[kept[r]] = static_cast<Index>(r);

  std::vector<std::array<Triplet, 3>> rows(n);
  std::vector<int> row_size(n, 0);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Index v = static_cast<Index>(i);
      if (image[v] >= 0) {
        rows[v][0] = Triplet(v, image[v], 1.0);
        row_size[v] = 1;
        continue;
      }
      const Eigen::Vector3d p = fine.position(v);
      ClosestPoint<double> best{};
      Index best_face = -1;
      for (Index f = 0; f < coarse.face_count(); ++f) {
        const Face& face = coarse.faces()[f];
        const auto cp = closest_point_on_triangle(p, coarse.position(face[0]),
                                                  coarse.position(face[1]), coarse.position(face[2]));
        if (best_face < 0 || cp.squared_distance < best.squared_distance) {
          best = cp;
          best_face = f;
        }
      }
      const Face& face = coarse.faces()[best_face];
      Eigen::Vector3d w = best.barycentric.cwiseMax(0.0);
      w /= w.sum();
      // Corners are sorted so rows list columns in increasing order.
      std::array<std::pair<Index, double>, 3> corners{
          {{face[0], w[0]}, {face[1], w[1]}, {face[2], w[2]}}};
      std::sort(corners.begin(), corners.end());
      int k = 0;
      for (auto [c, weight] : corners)
        if (weight > 0.0) rows[v][k++] = Triplet(v, c, weight);
      row_size[v] = k;
    }
  });

  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(n) * 3);
  for (Index v = 0; v < n; ++v)
    for (int k = 0; k < row_size[v]; ++k) entries.push_back(rows[v][k]);
  return SparseMatrix(n, coarse.vertex_count(), entries);
}

std::vector<DecimationLevel> build_hierarchy(const TriangleMesh& mesh,
                                             std::span<const double> factors, int threads) {
  if (factors.empty()) throw Error("build_hierarchy: no factors given");
  std::vector<DecimationLevel> levels;
  levels.reserve(factors.size());
  for (double factor : factors) {
    const TriangleMesh& fine = levels.empty() ? mesh : levels.back().coarse;
    levels.push_back(decimate(fine, factor, threads));
  }
  return levels;
}

void save_hierarchy(std::span<const DecimationLevel> levels, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "spiralmesh-hierarchy";
  manifest["levels"] = nlohmann::json::array();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const std::string tag = std::to_string(i + 1);
    const std::string mesh_file = "level" + tag + ".off";
    const std::string down_file = "down" + tag + ".coo";
    const std::string up_file = "up" + tag + ".coo";
    save_off(levels[i].coarse, dir / mesh_file);
    save_coo(levels[i].down, dir / down_file);
    save_coo(levels[i].up, dir / up_file);
    manifest["levels"].push_back({{"factor", levels[i].factor},
                                  {"mesh", mesh_file},
                                  {"down", down_file},
                                  {"up", up_file},
                                  {"fine_vertex_count", levels[i].fine_count()},
                                  {"vertex_count", levels[i].coarse_count()},
                                  {"topology_hash", text::format_hex(topology_hash(levels[i].coarse))}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error((dir / "manifest.json").string() + ": cannot write manifest");
  out << manifest.dump(2) << '\n';
}

std::vector<DecimationLevel> load_hierarchy(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(manifest_path.string() + ": cannot open hierarchy manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string(), 0, e.what());
  }
  const auto dir = manifest_path.parent_path();
  std::vector<DecimationLevel> levels;
  try {
    for (const auto& entry : manifest.at("levels")) {
      DecimationLevel level;
      level.factor = entry.at("factor").get<double>();
      level.coarse = load_mesh(dir / entry.at("mesh").get<std::string>(), MeshFormat::Off);
      level.down = load_coo(dir / entry.at("down").get<std::string>());
      level.up = load_coo(dir / entry.at("up").get<std::string>());
      if (level.down.rows() != level.coarse.vertex_count() || level.up.cols() != level.down.rows() ||
          level.up.rows() != level.down.cols())
        throw ShapeError(manifest_path.string() + ": level matrices disagree with the level mesh");
      if (!levels.empty() && level.down.cols() != levels.back().coarse_count())
        throw ShapeError(manifest_path.string() + ": levels do not chain");
      level.kept.resize(level.down.rows(), -1);
      for (const Triplet& t : level.down.triplets()) level.kept[t.row()] = t.col();
      levels.push_back(std::move(level));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string(), 0, e.what());
  }
  return levels;
}

}  // namespace spiralmesh
