#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "spiralmesh/mesh.hpp"
#include "spiralmesh/synthetic.hpp"

namespace testing {

using namespace spiralmesh;

inline TriangleMesh icosahedron() { return make_icosphere(0); }

inline TriangleMesh single_triangle() {
  Points p(3, 3);
  p << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  return TriangleMesh(p, {{0, 1, 2}});
}

// Square [0,2]^2 split into 8 triangles with parallel diagonals, all
// counter-clockwise seen from +z. Vertex 4 is the only interior vertex and
// has six neighbors.
inline TriangleMesh flat_grid() {
  Points p(9, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) p.row(y * 3 + x) << x, y, 0;
  std::vector<Face> f;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      const Index a = y * 3 + x, b = a + 1, c = a + 3, d = a + 4;
      f.push_back({a, b, d});
      f.push_back({a, d, c});
    }
  return TriangleMesh(p, f);
}

// Two triangle fans sharing only vertex 0.
inline TriangleMesh bowtie() {
  Points p(5, 3);
  p << 0, 0, 0, 1, 0, 0, 1, 1, 0, -1, 0, 0, -1, -1, 0;
  return TriangleMesh(p, {{0, 1, 2}, {0, 3, 4}});
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("spiralmesh_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace testing
