#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "spiralmesh/geometry.hpp"
#include "spiralmesh/mesh.hpp"
#include "spiralmesh/sparse.hpp"

namespace spiralmesh {

/// Symmetric 4x4 form accumulating squared distances to planes.
template <typename Scalar>
class BasicQuadric {
 public:
  using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

  BasicQuadric() : m_(Matrix4::Zero()) {}
  explicit BasicQuadric(const Matrix4& m) : m_(m) {}

  /// weight * p p^T for a plane p = (a, b, c, d) with unit normal.
  static BasicQuadric from_plane(const Vector4<Scalar>& plane, Scalar weight = Scalar(1)) {
    return BasicQuadric(weight * plane * plane.transpose());
  }

  Scalar error(const Vector3<Scalar>& x) const {
    Vector4<Scalar> h;
    h << x, Scalar(1);
    return h.dot(m_ * h);
  }

  BasicQuadric& operator+=(const BasicQuadric& other) {
    m_ += other.m_;
    return *this;
  }
  friend BasicQuadric operator+(BasicQuadric a, const BasicQuadric& b) { return a += b; }

  const Matrix4& matrix() const { return m_; }

 private:
  Matrix4 m_;
};

using Quadric = BasicQuadric<double>;

/// Q(v) = sum over incident faces of the face-plane quadric. Zero-area faces
/// contribute nothing; their count is stored in *zero_area_faces if given.
std::vector<Quadric> vertex_quadrics(const TriangleMesh& mesh, int* zero_area_faces = nullptr);

struct CollapseCandidate {
  double cost = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

/// Minimizer of the combined quadric. The 3x3 system is solved only when
/// its condition number is below 1e12; otherwise the best of the midpoint,
/// a and b is taken (in that preference order on ties). Cost is clamped >= 0.
CollapseCandidate edge_collapse_cost(const Quadric& qsum, const Eigen::Vector3d& a,
                                     const Eigen::Vector3d& b);

/// One pooling step between a fine mesh and its decimated version.
struct DecimationLevel {
  TriangleMesh coarse;
  SparseMatrix down;  // coarse x fine, row r selects kept[r]
  SparseMatrix up;    // fine x coarse, barycentric rows
  std::vector<Index> kept;
  double factor = 1.0;
  /// Costs of the accepted contractions in the order they were applied.
  std::vector<double> collapse_costs;

  Index fine_count() const { return down.cols(); }
  Index coarse_count() const { return coarse.vertex_count(); }
};

inline constexpr double kBoundaryQuadricWeight = 1000.0;

/// Quadric edge collapse down to ceil(vertex_count / factor) vertices.
///
/// Contractions are popped by (cost, min index, max index); the survivor
/// keeps the smaller original index and moves to the quadric-optimal
/// position. A contraction is skipped when it violates the link condition,
/// would join two boundary vertices through an interior edge, or flips (or
/// collapses) an incident face normal. Throws DecimationError if no valid
/// contraction remains before the target is reached.
DecimationLevel decimate(const TriangleMesh& mesh, double factor, int threads = 1);

/// Unpooling matrix: kept vertices map one-hot onto their coarse image; every
/// other fine vertex gets the barycentric coordinates of its closest point
/// on the coarse surface (brute force over coarse triangles).
SparseMatrix up_transform(const TriangleMesh& fine, const TriangleMesh& coarse,
                          std::span<const Index> kept, int threads = 1);

/// Level i decimates level i-1's coarse mesh by factors[i].
std::vector<DecimationLevel> build_hierarchy(const TriangleMesh& mesh,
                                             std::span<const double> factors, int threads = 1);

/// Writes level<i>.off, down<i>.coo, up<i>.coo (i from 1) and manifest.json.
void save_hierarchy(std::span<const DecimationLevel> levels, const std::filesystem::path& dir);
std::vector<DecimationLevel> load_hierarchy(const std::filesystem::path& manifest);

}  // namespace spiralmesh
