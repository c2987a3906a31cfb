#include "spiralmesh/synthetic.hpp"

#include <cmath>
#include <map>

#include <Eigen/Geometry>

#include "spiralmesh/error.hpp"
#include "spiralmesh/random.hpp"

namespace spiralmesh {

TriangleMesh make_icosphere(int subdivisions) {
  if (subdivisions < 0 || subdivisions > 6)
    throw Error("icosphere subdivisions must be in [0, 6]");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Face> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<Index, Index>, Index> midpoint;
    auto split = [&](Index a, Index b) {
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((0.5 * (verts[a] + verts[b])).normalized());
      const Index id = static_cast<Index>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> refined;
    refined.reserve(faces.size() * 4);
    for (const Face& f : faces) {
      const Index ab = split(f[0], f[1]), bc = split(f[1], f[2]), ca = split(f[2], f[0]);
      refined.push_back({f[0], ab, ca});
      refined.push_back({f[1], bc, ab});
      refined.push_back({f[2], ca, bc});
      refined.push_back({ab, bc, ca});
    }
    faces = std::move(refined);
  }

  Points points(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i)
    points.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  return TriangleMesh(std::move(points), std::move(faces));
}

Points vertex_normals(const TriangleMesh& mesh) {
  Points normals = Points::Zero(mesh.vertex_count(), 3);
  for (const Face& f : mesh.faces()) {
    const Eigen::Vector3d a = mesh.position(f[0]), b = mesh.position(f[1]), c = mesh.position(f[2]);
    const Eigen::RowVector3d n = (b - a).cross(c - a).transpose();
    for (Index v : f) normals.row(v) += n;
  }
  for (Index v = 0; v < mesh.vertex_count(); ++v) {
    const double len = normals.row(v).norm();
    if (len > 0.0) normals.row(v) /= len;
  }
  return normals;
}

Eigen::VectorXd bump_field(const TriangleMesh& mesh, std::uint64_t seed) {
  constexpr int kBumps = 8;
  Rng rng(seed);
  Eigen::Vector3d centers[kBumps];
  double weights[kBumps], concentration[kBumps];
  for (int k = 0; k < kBumps; ++k) {
    Eigen::Vector3d c(rng.normal(), rng.normal(), rng.normal());
    centers[k] = c.normalized();
    weights[k] = rng.uniform(-1.0, 1.0);
    concentration[k] = rng.uniform(1.5, 6.0);
  }
  const Eigen::RowVector3d centroid = mesh.positions().colwise().mean();
  Eigen::VectorXd field(mesh.vertex_count());
  for (Index v = 0; v < mesh.vertex_count(); ++v) {
    Eigen::Vector3d u = (mesh.positions().row(v) - centroid).transpose();
    const double len = u.norm();
    if (len > 0.0) u /= len;
    double f = 0.0;
    for (int k = 0; k < kBumps; ++k) f += weights[k] * std::exp(concentration[k] * (u.dot(centers[k]) - 1.0));
    field[v] = f;
  }
  const double peak = field.cwiseAbs().maxCoeff();
  if (peak > 0.0) field /= peak;
  return field;
}

Points deform(const TriangleMesh& mesh, std::uint64_t seed, double amplitude) {
  if (amplitude == 0.0) return mesh.positions();
  const Eigen::VectorXd field = bump_field(mesh, seed);
  const Points normals = vertex_normals(mesh);
  Points out = mesh.positions();
  for (Index v = 0; v < mesh.vertex_count(); ++v) out.row(v) += amplitude * field[v] * normals.row(v);
  return out;
}

SyntheticShapeSet make_deformation_set(const TriangleMesh& templ, int count, double amplitude,
                                       std::uint64_t seed) {
  if (count < 1) throw Error("sample count must be positive");
  SyntheticShapeSet set{templ, {}, {}, 0};
  set.samples.reserve(count);
  for (int i = 0; i < count; ++i) set.samples.push_back(deform(templ, derive_seed(seed, i), amplitude));
  return set;
}

SyntheticShapeSet make_classification_set(const TriangleMesh& templ, int classes, int per_class,
                                          double amplitude, std::uint64_t seed) {
  if (classes < 1 || per_class < 1) throw Error("class and sample counts must be positive");
  SyntheticShapeSet set{templ, {}, {}, classes};
  const Points normals = vertex_normals(templ);
  Rng jitter(derive_seed(seed, 0xC1A55));
  for (int c = 0; c < classes; ++c) {
    const Eigen::VectorXd family = bump_field(templ, derive_seed(seed, 1'000'000 + c));
    for (int k = 0; k < per_class; ++k) {
      const std::uint64_t sample_id = static_cast<std::uint64_t>(c) * per_class + k;
      const Eigen::VectorXd noise = bump_field(templ, derive_seed(seed, sample_id));
      const double gain = jitter.uniform(0.8, 1.2);
      const Eigen::VectorXd field = amplitude * (gain * family + 0.25 * noise);
      Points p = templ.positions();
      for (Index v = 0; v < templ.vertex_count(); ++v) p.row(v) += field[v] * normals.row(v);
      set.samples.push_back(std::move(p));
      set.labels.push_back(c);
    }
  }
  return set;
}

}  // namespace spiralmesh
