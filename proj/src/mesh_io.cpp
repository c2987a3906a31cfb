#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>

#include "spiralmesh/error.hpp"
#include "spiralmesh/mesh.hpp"
#include "spiralmesh/text.hpp"

namespace spiralmesh {

namespace {

Points to_points(const std::vector<Eigen::Vector3d>& vertices) {
  Points points(static_cast<Eigen::Index>(vertices.size()), 3);
  for (std::size_t i = 0; i < vertices.size(); ++i)
    points.row(static_cast<Eigen::Index>(i)) = vertices[i].transpose();
  return points;
}

Eigen::Vector3d parse_vertex(std::span<const std::string_view> tokens, const std::string& source,
                             std::size_t line) {
  if (tokens.size() < 3) throw ParseError(source, line, "vertex needs 3 coordinates");
  Eigen::Vector3d p;
  for (int k = 0; k < 3; ++k) {
    const auto value = text::parse_number<double>(tokens[k]);
    if (!value) throw ParseError(source, line, "bad coordinate '" + std::string(tokens[k]) + "'");
    p[k] = *value;
  }
  return p;
}

void check_face(const Face& face, std::size_t vertex_count, const std::string& source,
                std::size_t line) {
  for (Index i : face) {
    if (i < 0 || static_cast<std::size_t>(i) >= vertex_count)
      throw ParseError(source, line,
                       "face index out of range (" + std::to_string(vertex_count) + " vertices)");
  }
  if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
    throw ParseError(source, line, "degenerate face repeats a vertex");
}

TriangleMesh finish(std::vector<Eigen::Vector3d>& vertices, std::vector<Face>& faces,
                    const std::string& source) {
  if (vertices.empty() || faces.empty())
    throw ParseError(source, 0, "empty mesh (no vertices or no faces)");
  return TriangleMesh(to_points(vertices), std::move(faces));
}

TriangleMesh read_obj(std::istream& in, const std::string& source) {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Face> faces;
  std::vector<std::size_t> face_lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto tokens = text::split(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    if (tokens[0] == "v") {
      vertices.push_back(parse_vertex(std::span(tokens).subspan(1), source, number));
    } else if (tokens[0] == "f") {
      if (tokens.size() != 4) throw ParseError(source, number, "only triangular faces are supported");
      Face face;
      for (int k = 0; k < 3; ++k) {
        std::string_view tok = tokens[k + 1];
        tok = tok.substr(0, tok.find('/'));
        const auto value = text::parse_number<long long>(tok);
        if (!value || *value == 0)
          throw ParseError(source, number, "bad face index '" + std::string(tokens[k + 1]) + "'");
        // Negative OBJ indices are relative to the vertices read so far.
        const long long idx = *value > 0 ? *value - 1 : static_cast<long long>(vertices.size()) + *value;
        if (idx < 0 || idx > std::numeric_limits<Index>::max())
          throw ParseError(source, number, "face index out of range");
        face[k] = static_cast<Index>(idx);
      }
      faces.push_back(face);
      face_lines.push_back(number);
    }
  }
  // Forward references are legal in OBJ, so ranges are checked at the end.
  for (std::size_t f = 0; f < faces.size(); ++f)
    check_face(faces[f], vertices.size(), source, face_lines[f]);
  return finish(vertices, faces, source);
}

TriangleMesh read_off(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t number = 0;
  auto next_tokens = [&]() -> std::vector<std::string_view> {
    while (std::getline(in, line)) {
      ++number;
      auto tokens = text::split(line);
      if (!tokens.empty() && tokens[0].front() != '#') return tokens;
    }
    return {};
  };

  auto tokens = next_tokens();
  if (tokens.empty() || tokens[0] != "OFF") throw ParseError(source, number, "missing OFF header");
  tokens.erase(tokens.begin());
  if (tokens.empty()) tokens = next_tokens();
  if (tokens.size() < 2) throw ParseError(source, number, "expected '<vertices> <faces> [edges]'");
  const auto nv = text::parse_number<long long>(tokens[0]);
  const auto nf = text::parse_number<long long>(tokens[1]);
  if (!nv || !nf || *nv < 0 || *nf < 0) throw ParseError(source, number, "bad element counts");

  std::vector<Eigen::Vector3d> vertices;
  vertices.reserve(static_cast<std::size_t>(*nv));
  for (long long i = 0; i < *nv; ++i) {
    tokens = next_tokens();
    if (tokens.empty()) throw ParseError(source, number, "unexpected end of file in vertex list");
    vertices.push_back(parse_vertex(tokens, source, number));
  }
  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(*nf));
  for (long long i = 0; i < *nf; ++i) {
    tokens = next_tokens();
    if (tokens.empty()) throw ParseError(source, number, "unexpected end of file in face list");
    if (tokens[0] != "3" || tokens.size() < 4)
      throw ParseError(source, number, "only triangular faces ('3 i j k') are supported");
    Face face;
    for (int k = 0; k < 3; ++k) {
      const auto value = text::parse_number<long long>(tokens[k + 1]);
      if (!value || *value < 0 || *value > std::numeric_limits<Index>::max())
        throw ParseError(source, number, "bad face index '" + std::string(tokens[k + 1]) + "'");
      face[k] = static_cast<Index>(*value);
    }
    check_face(face, vertices.size(), source, number);
    faces.push_back(face);
  }
  return finish(vertices, faces, source);
}

}  // namespace

MeshFormat mesh_format_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".obj") return MeshFormat::Obj;
  if (ext == ".off") return MeshFormat::Off;
  throw Error(path.string() + ": unknown mesh extension '" + ext + "' (expected .obj or .off)");
}

TriangleMesh read_mesh(std::istream& in, MeshFormat format, std::string_view source) {
  const std::string name(source);
  return format == MeshFormat::Obj ? read_obj(in, name) : read_off(in, name);
}

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(path.string() + ": cannot open mesh file");
  return read_mesh(in, format, path.string());
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  return load_mesh(path, mesh_format_for(path));
}

void write_off(std::ostream& out, const TriangleMesh& mesh) {
  out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.face_count() << " 0\n";
  for (Index v = 0; v < mesh.vertex_count(); ++v) {
    const auto row = mesh.positions().row(v);
    out << text::format_double(row[0]) << ' ' << text::format_double(row[1]) << ' '
        << text::format_double(row[2]) << '\n';
  }
  for (const Face& f : mesh.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

void save_off(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot write mesh file");
  write_off(out, mesh);
}

}  // namespace spiralmesh
