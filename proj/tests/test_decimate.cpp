#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "spiralmesh/decimate.hpp"
#include "spiralmesh/error.hpp"
#include "spiralmesh/sparse.hpp"
#include "support.hpp"

using namespace spiralmesh;
using Eigen::Vector3d;

namespace {

Eigen::Matrix4d plane_quadric(double a, double b, double c, double d, double w = 1.0) {
  Eigen::Vector4d p(a, b, c, d);
  return w * p * p.transpose();
}

Eigen::MatrixXd dense(const SparseMatrix& s) { return Eigen::MatrixXd(s.matrix()); }

void check_level(const DecimationLevel& level, Index fine) {
  const Index coarse = level.coarse_count();
  CHECK(level.down.rows() == coarse);
  CHECK(level.down.cols() == fine);
  CHECK(level.down.nonzeros() == coarse);
  for (const Triplet& t : level.down.triplets()) {
    CHECK(t.value() == 1.0);
    CHECK(t.col() == level.kept[t.row()]);
  }
  const Eigen::MatrixXd d = dense(level.down);
  CHECK((d * d.transpose() - Eigen::MatrixXd::Identity(coarse, coarse)).cwiseAbs().maxCoeff() == 0.0);

  CHECK(level.up.rows() == fine);
  CHECK(level.up.cols() == coarse);
  const Eigen::MatrixXd up = dense(level.up);
  CHECK(up.minCoeff() >= 0.0);
  for (Index r = 0; r < fine; ++r) {
    CHECK(std::abs(up.row(r).sum() - 1.0) <= 1e-12);
    CHECK((up.row(r).array() != 0.0).count() <= 3);
  }
  const Eigen::VectorXd constant = up * Eigen::VectorXd::Constant(coarse, 2.5);
  CHECK((constant.array() - 2.5).abs().maxCoeff() <= 1e-12);
  for (Index r = 0; r < coarse; ++r) {
    CHECK(up(level.kept[r], r) == 1.0);
    CHECK((up.row(level.kept[r]).array() != 0.0).count() == 1);
  }
  CHECK(std::is_sorted(level.kept.begin(), level.kept.end()));
  const ValidationReport report = validate(level.coarse);
  CHECK(report.is_edge_manifold);
  CHECK(report.non_manifold_vertices.empty());
  for (std::size_t i = 1; i < level.collapse_costs.size(); ++i)
    CHECK(level.collapse_costs[i] >= level.collapse_costs[i - 1] - 1e-9);
}

}  // namespace

TEST_CASE("flat fan quadric error is faces times height squared") {
  const TriangleMesh grid = testing::flat_grid();
  const std::vector<Quadric> q = vertex_quadrics(grid);
  for (double h : {0.0, 0.5, -2.0}) {
    CHECK(q[4].error(Vector3d(0.3, -1.0, h)) == doctest::Approx(6.0 * h * h).epsilon(1e-12));
    CHECK(q[0].error(Vector3d(7.0, 1.0, h)) == doctest::Approx(2.0 * h * h).epsilon(1e-12));
  }
  for (Index v = 0; v < 9; ++v) CHECK(std::abs(q[v].error(grid.position(v))) < 1e-15);
}

TEST_CASE("icosahedron vertex quadric at the origin") {
  const TriangleMesh m = testing::icosahedron();
  const std::vector<Quadric> q = vertex_quadrics(m);
  // Distance from the origin to a face plane, computed from face 0 directly.
  const Face f = m.faces()[0];
  const Vector3d a = m.position(f[0]), b = m.position(f[1]), c = m.position(f[2]);
  const double d = std::abs((b - a).cross(c - a).normalized().dot(a));
  for (Index v = 0; v < 12; ++v) CHECK(q[v].error(Vector3d::Zero()) == doctest::Approx(5.0 * d * d).epsilon(1e-12));
}

TEST_CASE("zero area faces are counted and skipped") {
  Points p(4, 3);
  p << 0, 0, 0, 1, 0, 0, 2, 0, 0, 0, 1, 0;
  int skipped = 0;
  const std::vector<Quadric> q = vertex_quadrics(TriangleMesh(p, {{0, 1, 2}, {0, 1, 3}}), &skipped);
  CHECK(skipped == 1);
  CHECK(q[2].matrix().isZero());
}

TEST_CASE("collapse cost on a shared plane is zero") {
  const Quadric q(plane_quadric(0, 0, 1, -1));
  const CollapseCandidate c = edge_collapse_cost(q, Vector3d(0, 0, 1), Vector3d(1, 2, 1));
  CHECK(c.cost == 0.0);
  CHECK(std::abs(c.position.z() - 1.0) < 1e-12);
}

TEST_CASE("zero quadric falls back to the midpoint") {
  const CollapseCandidate c = edge_collapse_cost(Quadric(), Vector3d(0, 0, 0), Vector3d(2, 4, 6));
  CHECK(c.cost == 0.0);
  CHECK(c.position == Vector3d(1, 2, 3));
}

TEST_CASE("crease between two orthogonal planes") {
  const Vector3d a(0.3, 0.0, 0.2), b(-0.1, 1.0, 0.4);
  // x = 0 and z = 0 meet along the y axis; a weak plane y = 0.5 pins the
  // position along the crease so the 3x3 system is solvable.
  const Quadric pinned(plane_quadric(1, 0, 0, 0) + plane_quadric(0, 0, 1, 0) +
                       plane_quadric(0, 1, 0, -0.5, 1e-3));
  const CollapseCandidate c = edge_collapse_cost(pinned, a, b);
  CHECK(std::abs(c.position.x()) < 1e-12);
  CHECK(std::abs(c.position.z()) < 1e-12);
  double grid_best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 40; ++i)
    for (int j = 0; j <= 40; ++j)
      for (int k = 0; k <= 40; ++k) {
        const Vector3d p(-0.5 + i * 0.025, -0.5 + j * 0.05, -0.5 + k * 0.025);
        grid_best = std::min(grid_best, pinned.error(p));
      }
  CHECK(c.cost <= grid_best + 1e-12);
  for (const Vector3d& p : {a, b, Vector3d(0.5 * (a + b))}) CHECK(c.cost <= pinned.error(p));

  // Without the pin the system is singular and the best of three is used.
  const Quadric crease(plane_quadric(1, 0, 0, 0) + plane_quadric(0, 0, 1, 0));
  const CollapseCandidate f = edge_collapse_cost(crease, a, b);
  for (const Vector3d& p : {a, b, Vector3d(0.5 * (a + b))}) CHECK(f.cost <= crease.error(p));
  for (int s = 0; s <= 100; ++s) CHECK(f.cost <= crease.error(a + (b - a) * (s / 100.0)) + 0.03);
}

TEST_CASE("icosphere-3 by four gives 161 vertices") {
  const TriangleMesh m = make_icosphere(3);
  REQUIRE(m.vertex_count() == 642);
  const DecimationLevel level = decimate(m, 4.0);
  CHECK(level.coarse_count() == 161);
  CHECK(level.collapse_costs.size() == 642 - 161);
  check_level(level, 642);
}

TEST_CASE("four level hierarchy of icosphere-4") {
  const TriangleMesh m = make_icosphere(4);
  const std::vector<double> factors{4, 4, 4, 4};
  const std::vector<DecimationLevel> levels = build_hierarchy(m, factors);
  REQUIRE(levels.size() == 4);
  const Index expected[] = {641, 161, 41, 11};
  Index fine = 2562;
  for (int i = 0; i < 4; ++i) {
    CHECK(levels[i].coarse_count() == expected[i]);
    check_level(levels[i], fine);
    fine = levels[i].coarse_count();
  }
  const std::vector<DecimationLevel> again = build_hierarchy(m, factors);
  for (int i = 0; i < 4; ++i) {
    CHECK(again[i].down == levels[i].down);
    CHECK(again[i].up == levels[i].up);
    CHECK(again[i].coarse.positions() == levels[i].coarse.positions());
  }
}

TEST_CASE("one level hierarchy equals decimate") {
  const TriangleMesh m = make_icosphere(2);
  const std::vector<double> f{3.0};
  const DecimationLevel direct = decimate(m, 3.0);
  const std::vector<DecimationLevel> chain = build_hierarchy(m, f);
  CHECK(chain.at(0).up == direct.up);
  CHECK(chain.at(0).coarse.faces() == direct.coarse.faces());
}

TEST_CASE("factor barely above one is the identity level") {
  const TriangleMesh m = make_icosphere(1);
  const DecimationLevel level = decimate(m, 1.01);  // ceil(42 / 1.01) = 42
  CHECK(level.coarse_count() == 42);
  CHECK(level.down == SparseMatrix::identity(42));
  CHECK(level.up == SparseMatrix::identity(42));
  CHECK(level.coarse.faces() == m.faces());
  CHECK(level.coarse.positions() == m.positions());
}

TEST_CASE("decimation preconditions") {
  const TriangleMesh m = make_icosphere(1);
  CHECK_THROWS(decimate(m, 1.0));
  CHECK_THROWS(decimate(m, 20.0));  // target 3
  CHECK_THROWS(build_hierarchy(m, std::vector<double>{}));
}

TEST_CASE("open meshes decimate with boundary preservation") {
  const TriangleMesh open = testing::flat_grid();
  const DecimationLevel level = decimate(open, 1.5);  // 9 -> 6
  CHECK(level.coarse_count() == 6);
  check_level(level, 9);
  for (Index v = 0; v < level.coarse_count(); ++v) CHECK(std::abs(level.coarse.position(v).z()) < 1e-12);
}

TEST_CASE("up rows are one-hot for removed vertices on a coarse vertex") {
  const TriangleMesh ico = testing::icosahedron();
  Points fine_p(13, 3);
  fine_p.topRows(12) = ico.positions();
  fine_p.row(12) = ico.positions().row(5);
  std::vector<Face> faces = ico.faces();
  const TriangleMesh fine(fine_p, faces);
  std::vector<Index> kept(12);
  std::iota(kept.begin(), kept.end(), 0);
  const Eigen::MatrixXd up = dense(up_transform(fine, ico, kept));
  CHECK(std::abs(up(12, 5) - 1.0) < 1e-9);
  CHECK(up.row(12).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(up_transform(fine, TriangleMesh(ico.positions(), {}), kept));
}

TEST_CASE("sparse matrices") {
  const SparseMatrix s(2, 3, {{0, 2, 0.1}, {1, 0, -3.0}, {1, 1, 0.0}});
  CHECK(s.nonzeros() == 3);
  CHECK_THROWS(SparseMatrix(2, 2, {{0, 2, 1.0}}));
  CHECK_THROWS(SparseMatrix(2, 2, {{0, 1, 1.0}, {0, 1, 2.0}}));
  std::stringstream out;
  write_coo(out, s);
  CHECK(out.str() == "coo 2 3 3\n0 2 0.1\n1 0 -3\n1 1 0\n");
  CHECK(read_coo(out) == s);
  std::istringstream bad("coo 2 2 1\n0 5 1\n");
  try {
    read_coo(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("hierarchy persistence is byte identical") {
  const TriangleMesh m = make_icosphere(3);
  const std::vector<double> factors{4, 4};
  const std::vector<DecimationLevel> levels = build_hierarchy(m, factors);
  const auto dir = testing::temp_dir("hierarchy");
  save_hierarchy(levels, dir / "a");
  const std::vector<DecimationLevel> back = load_hierarchy(dir / "a" / "manifest.json");
  REQUIRE(back.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(back[i].down == levels[i].down);
    CHECK(back[i].up == levels[i].up);
    CHECK(back[i].kept == levels[i].kept);
    CHECK(back[i].coarse.positions() == levels[i].coarse.positions());
  }
  save_hierarchy(back, dir / "b");
  for (const char* name : {"manifest.json", "level1.off", "down1.coo", "up1.coo", "up2.coo"})
    CHECK(testing::read_file(dir / "a" / name) == testing::read_file(dir / "b" / name));
}
