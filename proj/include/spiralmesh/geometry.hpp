#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace spiralmesh {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;

/// Unnormalized triangle normal (length is twice the area).
template <typename Derived>
Vector3<typename Derived::Scalar> triangle_normal(const Eigen::MatrixBase<Derived>& a,
                                                  const Eigen::MatrixBase<Derived>& b,
                                                  const Eigen::MatrixBase<Derived>& c) {
  return (b - a).cross(c - a);
}

/// Plane (n, -n·a) with unit n through the triangle; zero for a degenerate one.
template <typename Derived>
Vector4<typename Derived::Scalar> triangle_plane(const Eigen::MatrixBase<Derived>& a,
                                                 const Eigen::MatrixBase<Derived>& b,
                                                 const Eigen::MatrixBase<Derived>& c) {
  using Scalar = typename Derived::Scalar;
  Vector3<Scalar> n = triangle_normal(a, b, c);
  const Scalar len = n.norm();
  if (!(len > Scalar(0))) return Vector4<Scalar>::Zero();
  n /= len;
  Vector4<Scalar> p;
  p << n, -n.dot(a);
  return p;
}

template <typename Scalar>
struct ClosestPoint {
  Vector3<Scalar> point;
  Vector3<Scalar> barycentric;  // weights of (a, b, c), nonnegative, sum 1
  Scalar squared_distance;
};

/// Closest point on triangle abc to p, with its barycentric coordinates.
/// Region classification follows Ericson, Real-Time Collision Detection 5.1.5.
template <typename Derived>
ClosestPoint<typename Derived::Scalar> closest_point_on_triangle(
    const Eigen::MatrixBase<Derived>& p, const Eigen::MatrixBase<Derived>& a,
    const Eigen::MatrixBase<Derived>& b, const Eigen::MatrixBase<Derived>& c) {
  using Scalar = typename Derived::Scalar;
  using V = Vector3<Scalar>;
  auto make = [&](Scalar u, Scalar v, Scalar w) {
    ClosestPoint<Scalar> r;
    r.barycentric = V(u, v, w);
    r.point = u * a + v * b + w * c;
    r.squared_distance = (p - r.point).squaredNorm();
    return r;
  };

  const V ab = b - a, ac = c - a, ap = p - a;
  const Scalar d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return make(1, 0, 0);

  const V bp = p - b;
  const Scalar d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return make(0, 1, 0);

  const Scalar vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const Scalar v = d1 / (d1 - d3);
    return make(1 - v, v, 0);
  }

  const V cp = p - c;
  const Scalar d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return make(0, 0, 1);

  const Scalar vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const Scalar w = d2 / (d2 - d6);
    return make(1 - w, 0, w);
  }

  const Scalar va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const Scalar w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return make(0, 1 - w, w);
  }

  const Scalar denom = va + vb + vc;
  if (!(denom > Scalar(0))) {
    // Degenerate triangle that slipped past the edge regions: nearest corner.
    ClosestPoint<Scalar> best = make(1, 0, 0);
    for (auto cand : {make(0, 1, 0), make(0, 0, 1)})
      if (cand.squared_distance < best.squared_distance) best = cand;
    return best;
  }
  const Scalar v = vb / denom;
  const Scalar w = vc / denom;
  return make(1 - v - w, v, w);
}

}  // namespace spiralmesh
