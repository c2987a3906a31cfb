#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "spiralmesh/mesh.hpp"

namespace spiralmesh {

/// Empirical CDF of per-vertex normalized geodesic errors. Unreachable pairs
/// carry +inf and never count as within any finite x.
class GeodesicErrorCurve {
 public:
  GeodesicErrorCurve() = default;
  explicit GeodesicErrorCurve(std::vector<double> errors);

  /// Fraction of errors <= x.
  double operator()(double x) const;
  double exact_fraction() const { return (*this)(0.0); }
  const std::vector<double>& errors() const { return errors_; }
  std::size_t size() const { return errors_.size(); }

  /// Rows "x,fraction" with a header. The default grid is 0 to 0.25 in
  /// steps of 0.0025.
  void write_csv(std::ostream& out, std::span<const double> xs = {}) const;
  static std::vector<double> default_grid();

 private:
  std::vector<double> errors_;
};

enum class DiameterEstimate { Geodesic, BoundingBox };

DiameterEstimate diameter_estimate_from_string(const std::string& name);
std::string to_string(DiameterEstimate estimate);
double mesh_diameter(const TriangleMesh& mesh, DiameterEstimate estimate);

/// Graph-geodesic distance from pred[i] to truth[i] on `mesh`, divided by
/// `diameter`. Sources are grouped so each distinct truth vertex runs one
/// Dijkstra.
std::vector<double> geodesic_errors(std::span<const Index> pred, std::span<const Index> truth,
                                    const TriangleMesh& mesh, double diameter);

GeodesicErrorCurve geodesic_error_curve(std::span<const Index> pred, std::span<const Index> truth,
                                        const TriangleMesh& mesh,
                                        DiameterEstimate estimate = DiameterEstimate::Geodesic);

double exact_match_accuracy(std::span<const Index> pred, std::span<const Index> truth);

struct ClassificationReport {
  std::vector<std::vector<int>> confusion;  // [truth][pred]
  std::vector<int> support;                 // row sums
  std::vector<double> per_class_accuracy;   // NaN for classes without samples
  double accuracy = 0.0;                    // overall fraction correct
  double mean_class_accuracy = 0.0;         // mean over classes with samples

  int total() const;
  void write_table(std::ostream& out) const;
};

ClassificationReport classification_report(std::span<const int> pred, std::span<const int> truth,
                                            int classes);

struct ErrorStats {
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  std::size_t count = 0;
};

ErrorStats error_stats(std::vector<double> values);

}  // namespace spiralmesh
