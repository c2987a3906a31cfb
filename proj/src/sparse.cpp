#include "spiralmesh/sparse.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "spiralmesh/error.hpp"
#include "spiralmesh/text.hpp"

namespace spiralmesh {

SparseMatrix::SparseMatrix(Index rows, Index cols, const std::vector<Triplet>& entries)
    : storage_(rows, cols) {
  std::vector<Triplet> sorted = entries;
  std::sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
    return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
  });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Triplet& t = sorted[i];
    if (t.row() < 0 || t.row() >= rows || t.col() < 0 || t.col() >= cols)
      throw ShapeError("sparse entry (" + std::to_string(t.row()) + ", " + std::to_string(t.col()) +
                       ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    if (i > 0 && sorted[i - 1].row() == t.row() && sorted[i - 1].col() == t.col())
      throw ShapeError("duplicate sparse entry (" + std::to_string(t.row()) + ", " +
                       std::to_string(t.col()) + ")");
  }
  storage_.setFromTriplets(sorted.begin(), sorted.end());
  storage_.makeCompressed();
}

SparseMatrix SparseMatrix::identity(Index n) {
  std::vector<Triplet> entries;
  entries.reserve(n);
  for (Index i = 0; i < n; ++i) entries.emplace_back(i, i, 1.0);
  return SparseMatrix(n, n, entries);
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(storage_.nonZeros());
  for (Index r = 0; r < storage_.outerSize(); ++r)
    for (Storage::InnerIterator it(storage_, r); it; ++it) out.emplace_back(r, it.col(), it.value());
  return out;
}

bool SparseMatrix::operator==(const SparseMatrix& other) const {
  if (rows() != other.rows() || cols() != other.cols()) return false;
  const auto a = triplets(), b = other.triplets();
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](const Triplet& x, const Triplet& y) {
    return x.row() == y.row() && x.col() == y.col() && x.value() == y.value();
  });
}

void write_coo(std::ostream& out, const SparseMatrix& m) {
  out << "coo " << m.rows() << ' ' << m.cols() << ' ' << m.nonzeros() << '\n';
  for (const Triplet& t : m.triplets())
    out << t.row() << ' ' << t.col() << ' ' << text::format_double(t.value()) << '\n';
}

SparseMatrix read_coo(std::istream& in, std::string_view source) {
  const std::string name(source);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name, 1, "empty COO file");
  const auto header = text::split(line);
  if (header.size() != 4 || header[0] != "coo")
    throw ParseError(name, 1, "expected 'coo <rows> <cols> <nnz>'");
  const auto rows = text::parse_number<Index>(header[1]);
  const auto cols = text::parse_number<Index>(header[2]);
  const auto nnz = text::parse_number<long long>(header[3]);
  if (!rows || !cols || !nnz || *rows < 0 || *cols < 0 || *nnz < 0)
    throw ParseError(name, 1, "bad header field");
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(*nnz));
  for (long long k = 0; k < *nnz; ++k) {
    const std::size_t number = static_cast<std::size_t>(k) + 2;
    if (!std::getline(in, line)) throw ParseError(name, number, "missing entry");
    const auto tokens = text::split(line);
    if (tokens.size() != 3) throw ParseError(name, number, "expected '<row> <col> <value>'");
    const auto r = text::parse_number<Index>(tokens[0]);
    const auto c = text::parse_number<Index>(tokens[1]);
    const auto v = text::parse_number<double>(tokens[2]);
    if (!r || !c || !v) throw ParseError(name, number, "bad entry");
    if (*r < 0 || *r >= *rows || *c < 0 || *c >= *cols)
      throw ParseError(name, number, "entry outside the matrix");
    entries.emplace_back(*r, *c, *v);
  }
  try {
    return SparseMatrix(*rows, *cols, entries);
  } catch (const ShapeError& e) {
    throw ParseError(name, 0, e.what());
  }
}

void save_coo(const SparseMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot write COO file");
  write_coo(out, m);
}

SparseMatrix load_coo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path.string() + ": cannot open COO file");
  return read_coo(in, path.string());
}

}  // namespace spiralmesh
