#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/SparseCore>

#include "spiralmesh/mesh.hpp"

namespace spiralmesh {

using Triplet = Eigen::Triplet<double, Index>;

/// Real sparse matrix in compressed row-major form.
///
/// Construction rejects out-of-range and duplicate (row, col) entries; an
/// explicit zero is kept as a stored entry.
class SparseMatrix {
 public:
  using Storage = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;

  SparseMatrix() = default;
  SparseMatrix(Index rows, Index cols, const std::vector<Triplet>& entries);

  static SparseMatrix identity(Index n);

  Index rows() const { return static_cast<Index>(storage_.rows()); }
  Index cols() const { return static_cast<Index>(storage_.cols()); }
  Index nonzeros() const { return static_cast<Index>(storage_.nonZeros()); }
  const Storage& matrix() const { return storage_; }

  /// Entries sorted by (row, col).
  std::vector<Triplet> triplets() const;

  bool operator==(const SparseMatrix& other) const;

 private:
  Storage storage_;
};

/// COO text: `coo <rows> <cols> <nnz>` then `<row> <col> <value>` lines.
void write_coo(std::ostream& out, const SparseMatrix& m);
SparseMatrix read_coo(std::istream& in, std::string_view source = "<stream>");
void save_coo(const SparseMatrix& m, const std::filesystem::path& path);
SparseMatrix load_coo(const std::filesystem::path& path);

}  // namespace spiralmesh
