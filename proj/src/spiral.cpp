#include "spiralmesh/spiral.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "spiralmesh/error.hpp"
#include "spiralmesh/parallel.hpp"
#include "spiralmesh/text.hpp"

namespace spiralmesh {

std::uint64_t topology_hash(const TriangleMesh& mesh) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const Face& face : mesh.faces()) {
    for (Index i : face) {
      const auto u = static_cast<std::uint32_t>(i);
      for (int byte = 0; byte < 4; ++byte) {
        h ^= (u >> (8 * byte)) & 0xffu;
        h *= 0x100000001b3ull;
      }
    }
  }
  return h;
}

namespace {

// Ordered one-rings, computed on first use so that non-manifold vertices
// fail only when a spiral actually reaches them.
class RingCache {
 public:
  explicit RingCache(const TriangleMesh& mesh) : mesh_(mesh) {}

  const std::vector<Index>& ring(Index v) {
    auto it = rings_.find(v);
    if (it == rings_.end()) it = rings_.emplace(v, one_ring_ordered(mesh_, v)).first;
    return it->second;
  }

  bool closed(Index v) {
    // A closed umbrella has as many faces as neighbors.
    return mesh_.incident_faces(v).size() == ring(v).size();
  }

 private:
  const TriangleMesh& mesh_;
  std::unordered_map<Index, std::vector<Index>> rings_;
};

void append_unvisited_around(RingCache& cache, Index u, std::unordered_set<Index>& visited,
                             std::vector<Index>& out) {
  const auto& ring = cache.ring(u);
  const std::size_t m = ring.size();
  if (m == 0) return;
  std::size_t start = 0;
  if (cache.closed(u)) {
    // First visited -> unvisited transition in the canonical rotation.
    bool found = false;
    for (std::size_t i = 0; i < m && !found; ++i) {
      if (visited.count(ring[i]) && !visited.count(ring[(i + 1) % m])) {
        start = (i + 1) % m;
        found = true;
      }
    }
    if (!found) return;  // every neighbor already visited
  }
  for (std::size_t k = 0; k < m; ++k) {
    const Index w = ring[(start + k) % m];
    if (visited.insert(w).second) out.push_back(w);
  }
}

std::vector<Index> spiral_with_cache(RingCache& cache, Index v, std::size_t length) {
  std::vector<Index> spiral{v};
  std::unordered_set<Index> visited{v};
  std::vector<Index> last_ring{v};
  while (spiral.size() < length && !last_ring.empty()) {
    std::vector<Index> next;
    if (last_ring.size() == 1 && last_ring.front() == v) {
      for (Index w : cache.ring(v))
        if (visited.insert(w).second) next.push_back(w);
    } else {
      for (Index u : last_ring) append_unvisited_around(cache, u, visited, next);
    }
    spiral.insert(spiral.end(), next.begin(), next.end());
    last_ring = std::move(next);
  }
  spiral.resize(length, kSentinel);
  return spiral;
}

}  // namespace

std::vector<Index> build_spiral(const TriangleMesh& mesh, Index v, int length) {
  if (length < 1) throw Error("spiral length must be >= 1");
  if (v < 0 || v >= mesh.vertex_count()) throw Error("vertex " + std::to_string(v) + " out of range");
  RingCache cache(mesh);
  return spiral_with_cache(cache, v, static_cast<std::size_t>(length));
}

SpiralTable build_spiral_table(const TriangleMesh& mesh, int length, int dilation, int threads) {
  if (length < 1) throw Error("spiral length must be >= 1");
  if (dilation < 1) throw Error("spiral dilation must be >= 1");
  SpiralTable table;
  table.length = length;
  table.dilation = dilation;
  table.topology_hash = topology_hash(mesh);
  table.indices.resize(mesh.vertex_count(), length);
  const std::size_t full = static_cast<std::size_t>(length) * static_cast<std::size_t>(dilation);
  parallel_for(static_cast<std::size_t>(mesh.vertex_count()), threads,
               [&](std::size_t begin, std::size_t end) {
                 RingCache cache(mesh);
                 for (std::size_t v = begin; v < end; ++v) {
                   const auto spiral = spiral_with_cache(cache, static_cast<Index>(v), full);
                   for (int j = 0; j < length; ++j)
                     table.indices(static_cast<Eigen::Index>(v), j) =
                         spiral[static_cast<std::size_t>(j) * dilation];
                 }
               });
  return table;
}

void write_spiral_table(std::ostream& out, const SpiralTable& table) {
  out << "spiral " << table.vertex_count() << ' ' << table.length << ' ' << table.dilation << ' '
      << text::format_hex(table.topology_hash) << '\n';
  for (Eigen::Index r = 0; r < table.indices.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.indices.cols(); ++c) {
      if (c) out << ' ';
      out << table.indices(r, c);
    }
    out << '\n';
  }
}

SpiralTable read_spiral_table(std::istream& in, std::string_view source) {
  const std::string name(source);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name, 1, "empty spiral table file");
  const auto header = text::split(line);
  if (header.size() != 5 || header[0] != "spiral")
    throw ParseError(name, 1, "expected 'spiral <vertex_count> <length> <dilation> <hash>'");
  const auto n = text::parse_number<long long>(header[1]);
  const auto length = text::parse_number<int>(header[2]);
  const auto dilation = text::parse_number<int>(header[3]);
  const auto hash = text::parse_hex(header[4]);
  if (!n || *n < 0 || !length || *length < 1 || !dilation || *dilation < 1 || !hash)
    throw ParseError(name, 1, "bad header field");

  SpiralTable table;
  table.length = *length;
  table.dilation = *dilation;
  table.topology_hash = *hash;
  table.indices.resize(*n, *length);
  for (long long r = 0; r < *n; ++r) {
    const std::size_t number = static_cast<std::size_t>(r) + 2;
    if (!std::getline(in, line)) throw ParseError(name, number, "missing row");
    const auto tokens = text::split(line);
    if (static_cast<int>(tokens.size()) != *length)
      throw ParseError(name, number,
                       "row has " + std::to_string(tokens.size()) + " entries, expected " +
                           std::to_string(*length));
    for (int c = 0; c < *length; ++c) {
      const auto value = text::parse_number<Index>(tokens[c]);
      if (!value || *value < kSentinel || *value >= *n)
        throw ParseError(name, number, "bad index '" + std::string(tokens[c]) + "'");
      table.indices(r, c) = *value;
    }
  }
  while (std::getline(in, line))
    if (!text::split(line).empty()) throw ParseError(name, static_cast<std::size_t>(*n) + 2, "trailing data");
  return table;
}

void save_spiral_table(const SpiralTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot write spiral table");
  write_spiral_table(out, table);
}

SpiralTable load_spiral_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path.string() + ": cannot open spiral table");
  return read_spiral_table(in, path.string());
}

SpiralTable load_spiral_table(const std::filesystem::path& path, const TriangleMesh& mesh) {
  SpiralTable table = load_spiral_table(path);
  const std::uint64_t expected = topology_hash(mesh);
  if (table.topology_hash != expected || table.vertex_count() != mesh.vertex_count())
    throw StaleTableError(path.string() + ": spiral table was built for topology " +
                          text::format_hex(table.topology_hash) + " (" +
                          std::to_string(table.vertex_count()) + " vertices), mesh has " +
                          text::format_hex(expected) + " (" +
                          std::to_string(mesh.vertex_count()) + " vertices)");
  return table;
}

}  // namespace spiralmesh
