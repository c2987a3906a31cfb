#pragma once

#include <cstdint>
#include <vector>

#include "spiralmesh/mesh.hpp"

namespace spiralmesh {

/// Unit-radius icosphere: icosahedron refined by 1-to-4 splits with
/// midpoints pushed to the sphere. 10 * 4^s + 2 vertices, outward winding.
TriangleMesh make_icosphere(int subdivisions);

/// Area-weighted unit vertex normals.
Points vertex_normals(const TriangleMesh& mesh);

/// Smooth scalar field in [-1, 1]: a sum of 8 random von Mises bumps on the
/// direction from the mesh centroid, scaled so max |f| = 1.
Eigen::VectorXd bump_field(const TriangleMesh& mesh, std::uint64_t seed);

/// Positions displaced by amplitude * bump_field(seed) along vertex normals.
Points deform(const TriangleMesh& mesh, std::uint64_t seed, double amplitude);

/// Same-topology samples of one template; vertex i corresponds to vertex i.
struct SyntheticShapeSet {
  TriangleMesh templ;
  std::vector<Points> samples;
  std::vector<int> labels;  // empty for unlabeled sets
  int class_count = 0;

  std::size_t size() const { return samples.size(); }
  TriangleMesh mesh(std::size_t i) const { return templ.with_positions(samples[i]); }
};

/// `count` independent deformations of the template.
SyntheticShapeSet make_deformation_set(const TriangleMesh& templ, int count, double amplitude,
                                       std::uint64_t seed);

/// `classes` deformation families, `per_class` samples each, class-major.
/// A sample of class c is the family field of c scaled by a factor in
/// [0.8, 1.2] plus a per-sample field of a quarter of the amplitude.
SyntheticShapeSet make_classification_set(const TriangleMesh& templ, int classes, int per_class,
                                          double amplitude, std::uint64_t seed);

}  // namespace spiralmesh
