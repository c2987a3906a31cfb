#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "spiralmesh/error.hpp"
#include "spiralmesh/mesh.hpp"
#include "support.hpp"

using namespace spiralmesh;
using testing::icosahedron;

namespace {

// Hop distances by repeated relaxation over the face list only.
std::vector<int> hop_oracle(const TriangleMesh& m, Index s) {
  std::vector<int> d(m.vertex_count(), -1);
  d[s] = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (const Face& f : m.faces())
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const Index u = f[a], v = f[b];
          if (d[u] >= 0 && (d[v] < 0 || d[u] + 1 < d[v])) {
            d[v] = d[u] + 1;
            changed = true;
          }
        }
  }
  return d;
}

// Bellman-Ford over face edges; left-to-right path sums like Dijkstra.
std::vector<double> distance_oracle(const TriangleMesh& m, Index s) {
  std::vector<double> d(m.vertex_count(), std::numeric_limits<double>::infinity());
  d[s] = 0.0;
  for (Index it = 0; it < m.vertex_count(); ++it)
    for (const Face& f : m.faces())
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          if (a == b) continue;
          const double w = (m.position(f[a]) - m.position(f[b])).norm();
          if (d[f[a]] + w < d[f[b]]) d[f[b]] = d[f[a]] + w;
        }
  return d;
}

bool has_face_with(const TriangleMesh& m, Index a, Index b, Index c) {
  for (const Face& f : m.faces())
    for (int r = 0; r < 3; ++r)
      if (f[r] == a && f[(r + 1) % 3] == b && f[(r + 2) % 3] == c) return true;
  return false;
}

}  // namespace

TEST_CASE("icosahedron degrees counted from the face list") {
  std::stringstream off;
  write_off(off, icosahedron());
  const TriangleMesh m = read_mesh(off, MeshFormat::Off);
  CHECK(m.vertex_count() == 12);
  CHECK(m.face_count() == 20);
  for (Index v = 0; v < 12; ++v) {
    std::set<Index> nb;
    for (const Face& f : m.faces())
      if (std::find(f.begin(), f.end(), v) != f.end())
        for (Index u : f)
          if (u != v) nb.insert(u);
    CHECK(nb.size() == 5);
    CHECK(m.neighbors(v).size() == 5);
  }
}

TEST_CASE("adjacency is symmetric") {
  const TriangleMesh m = make_icosphere(2);
  for (Index v = 0; v < m.vertex_count(); ++v)
    for (Index u : m.neighbors(v)) {
      const auto nu = m.neighbors(u);
      CHECK(std::binary_search(nu.begin(), nu.end(), v));
    }
}

TEST_CASE("OBJ single triangle") {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  const TriangleMesh m = read_mesh(in, MeshFormat::Obj);
  CHECK(m.vertex_count() == 3);
  CHECK(m.face_count() == 1);
  CHECK(validate(m).boundary_edge_count == 3);
}

TEST_CASE("OBJ faces with slash suffixes and ignored records") {
  std::istringstream in("# comment\nv 0 0 0\nvn 0 0 1\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1/1 2//1 3/2\n");
  const TriangleMesh m = read_mesh(in, MeshFormat::Obj);
  CHECK(m.face_count() == 1);
  CHECK(m.faces()[0] == Face{0, 1, 2});
}

TEST_CASE("OBJ out-of-range index names its line") {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\n\nf 1 2 99\n");
  try {
    read_mesh(in, MeshFormat::Obj, "bad.obj");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 5);
    CHECK(std::string(e.what()).find("bad.obj:5") != std::string::npos);
  }
}

TEST_CASE("malformed and empty inputs are rejected") {
  std::istringstream bad_vertex("v 0 0\n");
  CHECK_THROWS_AS(read_mesh(bad_vertex, MeshFormat::Obj), ParseError);
  std::istringstream quad("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  CHECK_THROWS_AS(read_mesh(quad, MeshFormat::Obj), ParseError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_mesh(empty, MeshFormat::Obj), ParseError);
  std::istringstream off_bad("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 0\n");
  try {
    read_mesh(off_bad, MeshFormat::Off);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 6);
  }
}

TEST_CASE("OFF round trip is exact") {
  const TriangleMesh m = make_icosphere(1);
  std::stringstream s;
  write_off(s, m);
  const TriangleMesh back = read_mesh(s, MeshFormat::Off);
  CHECK(back.positions() == m.positions());
  CHECK(back.faces() == m.faces());
  const auto dir = testing::temp_dir("mesh_io");
  save_off(m, dir / "m.off");
  CHECK(load_mesh(dir / "m.off").faces() == m.faces());
  CHECK(mesh_format_for("X.OBJ") == MeshFormat::Obj);
}

TEST_CASE("one_ring_ordered on the icosahedron") {
  const TriangleMesh m = icosahedron();
  for (Index v = 0; v < m.vertex_count(); ++v) {
    const std::vector<Index> ring = one_ring_ordered(m, v);
    REQUIRE(ring.size() == 5);
    CHECK(ring.front() == *std::min_element(ring.begin(), ring.end()));
    std::vector<Index> sorted = ring;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == k_ring(m, v, 1));
    for (std::size_t i = 0; i < ring.size(); ++i)
      CHECK(has_face_with(m, v, ring[i], ring[(i + 1) % ring.size()]));
  }
}

TEST_CASE("one_ring_ordered rotation invariance") {
  // The cyclic order depends only on the faces, not on their storage order.
  const TriangleMesh m = make_icosphere(1);
  std::vector<Face> faces = m.faces();
  std::reverse(faces.begin(), faces.end());
  for (Face& f : faces) std::rotate(f.begin(), f.begin() + 1, f.end());
  const TriangleMesh shuffled(m.positions(), faces);
  for (Index v = 0; v < m.vertex_count(); ++v) CHECK(one_ring_ordered(m, v) == one_ring_ordered(shuffled, v));
}

TEST_CASE("one_ring_ordered on boundary vertices") {
  const TriangleMesh tri = testing::single_triangle();
  CHECK(one_ring_ordered(tri, 0) == std::vector<Index>{1, 2});
  CHECK(one_ring_ordered(tri, 1) == std::vector<Index>{2, 0});

  const TriangleMesh grid = testing::flat_grid();
  const std::vector<Index> center = one_ring_ordered(grid, 4);
  CHECK(center.size() == 6);
  CHECK(center.front() == 0);
  for (std::size_t i = 0; i < center.size(); ++i)
    CHECK(has_face_with(grid, 4, center[i], center[(i + 1) % center.size()]));
  // Corner 0 has faces (0,1,4) and (0,4,3): the fan runs 1 -> 4 -> 3.
  CHECK(one_ring_ordered(grid, 0) == std::vector<Index>{1, 4, 3});
}

TEST_CASE("non-manifold umbrella is an error") {
  const TriangleMesh m = testing::bowtie();
  CHECK_THROWS_AS(one_ring_ordered(m, 0), TopologyError);
  const ValidationReport r = validate(m);
  CHECK(r.non_manifold_vertices == std::vector<Index>{0});
}

TEST_CASE("k_ring layers on the icosahedron") {
  const TriangleMesh m = icosahedron();
  for (Index v = 0; v < 12; ++v) {
    CHECK(k_ring(m, v, 0) == std::vector<Index>{v});
    CHECK(k_ring(m, v, 1).size() == 5);
    CHECK(k_ring(m, v, 2).size() == 5);
    CHECK(k_ring(m, v, 3).size() == 1);
    CHECK(k_ring(m, v, 4).empty());
  }
}

TEST_CASE("k_ring and bfs_layers agree with the hop oracle") {
  const TriangleMesh m = make_icosphere(2);
  for (Index v : {0, 17, 101}) {
    const std::vector<int> oracle = hop_oracle(m, v);
    CHECK(bfs_layers(m, v) == oracle);
    std::size_t covered = 0;
    for (int k = 0;; ++k) {
      const std::vector<Index> ring = k_ring(m, v, k);
      if (ring.empty()) break;
      for (Index u : ring) CHECK(oracle[u] == k);
      covered += ring.size();
    }
    CHECK(covered == static_cast<std::size_t>(m.vertex_count()));
  }
}

TEST_CASE("geodesic distances on the icosahedron") {
  const TriangleMesh m = icosahedron();
  const double edge = (m.position(0) - m.position(m.neighbors(0)[0])).norm();
  const std::vector<double> d = geodesic_distances(m, 0);
  CHECK(d[0] == 0.0);
  for (Index u : m.neighbors(0)) CHECK(d[u] == doctest::Approx(edge).epsilon(1e-15));
  const Index antipode = k_ring(m, 0, 3).front();
  CHECK(d[antipode] == doctest::Approx(3.0 * edge).epsilon(1e-12));
}

TEST_CASE("geodesic distances match the relaxation oracle exactly") {
  const TriangleMesh m = make_icosphere(1);  // 42 vertices
  for (Index s = 0; s < m.vertex_count(); s += 5) CHECK(geodesic_distances(m, s) == distance_oracle(m, s));
}

TEST_CASE("geodesic distances satisfy the triangle inequality") {
  const TriangleMesh m = testing::icosahedron().with_positions(
      deform(make_icosphere(0), 3, 0.2));
  std::vector<std::vector<double>> d;
  for (Index s = 0; s < m.vertex_count(); ++s) d.push_back(geodesic_distances(m, s));
  for (Index a = 0; a < 12; ++a)
    for (Index b = 0; b < 12; ++b)
      for (Index c = 0; c < 12; ++c) CHECK(d[a][c] <= d[a][b] + d[b][c] + 1e-12);
}

TEST_CASE("unreachable vertices are infinitely far") {
  Points p(6, 3);
  p << 0, 0, 0, 1, 0, 0, 0, 1, 0, 5, 0, 0, 6, 0, 0, 5, 1, 0;
  const TriangleMesh m(p, {{0, 1, 2}, {3, 4, 5}});
  CHECK(std::isinf(geodesic_distances(m, 0)[4]));
  CHECK(bfs_layers(m, 0)[4] == -1);
  CHECK(validate(m).connected_components == 2);
}

TEST_CASE("validate reports") {
  const ValidationReport ico = validate(icosahedron());
  CHECK(ico.is_edge_manifold);
  CHECK(ico.boundary_edge_count == 0);
  CHECK(ico.connected_components == 1);
  CHECK(ico.inconsistent_winding_pairs.empty());

  CHECK(validate(testing::single_triangle()).boundary_edge_count == 3);

  Points p(4, 3);
  p << 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0;
  const ValidationReport flipped = validate(TriangleMesh(p, {{0, 1, 2}, {1, 2, 3}}));
  CHECK(flipped.inconsistent_winding_pairs.size() == 1);
  CHECK(flipped.boundary_edge_count == 4);

  Points q(5, 3);
  q << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1;
  const ValidationReport fin = validate(TriangleMesh(q, {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}}));
  CHECK_FALSE(fin.is_edge_manifold);
  CHECK(fin.non_manifold_edges.size() == 1);

  const ValidationReport dup = validate(TriangleMesh(p, {{0, 1, 2}, {1, 2, 0}}));
  CHECK(dup.duplicate_faces.size() == 1);

  Points line(3, 3);
  line << 0, 0, 0, 1, 0, 0, 2, 0, 0;
  CHECK(validate(TriangleMesh(line, {{0, 1, 2}})).zero_area_faces == std::vector<Index>{0});
}

TEST_CASE("construction rejects invalid faces") {
  Points p(3, 3);
  p.setZero();
  CHECK_THROWS(TriangleMesh(p, {{0, 1, 3}}));
  CHECK_THROWS(TriangleMesh(p, {{0, 1, 1}}));
  CHECK_THROWS(TriangleMesh(p, {{0, -1, 2}}));
}

TEST_CASE("diameter estimates") {
  const TriangleMesh m = make_icosphere(2);
  CHECK(bounding_box_diagonal(m) == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-9));
  const double geo = estimate_geodesic_diameter(m);
  CHECK(geo > 2.0);        // at least the chord
  CHECK(geo < 3.5);        // close to half the great circle (pi)
}
