#include "spiralmesh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "spiralmesh/error.hpp"
#include "spiralmesh/text.hpp"

namespace spiralmesh {

GeodesicErrorCurve::GeodesicErrorCurve(std::vector<double> errors) : errors_(std::move(errors)) {
  for (double e : errors_)
    if (std::isnan(e) || e < 0.0) throw Error("geodesic errors must be non-negative");
  std::sort(errors_.begin(), errors_.end());
}

double GeodesicErrorCurve::operator()(double x) const {
  if (errors_.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto end = std::upper_bound(errors_.begin(), errors_.end(), x);
  return static_cast<double>(end - errors_.begin()) / static_cast<double>(errors_.size());
}

std::vector<double> GeodesicErrorCurve::default_grid() {
  std::vector<double> xs;
  for (int i = 0; i <= 100; ++i) xs.push_back(0.0025 * i);
  return xs;
}

void GeodesicErrorCurve::write_csv(std::ostream& out, std::span<const double> xs) const {
  const std::vector<double> grid = xs.empty() ? default_grid() : std::vector<double>(xs.begin(), xs.end());
  out << "x,fraction\n";
  for (double x : grid) out << text::format_double(x) << ',' << text::format_double((*this)(x)) << '\n';
}

DiameterEstimate diameter_estimate_from_string(const std::string& name) {
  if (name == "geodesic") return DiameterEstimate::Geodesic;
  if (name == "bbox") return DiameterEstimate::BoundingBox;
  throw Error("unknown diameter estimate '" + name + "' (expected geodesic or bbox)");
}

std::string to_string(DiameterEstimate estimate) {
  return estimate == DiameterEstimate::Geodesic ? "geodesic" : "bbox";
}

double mesh_diameter(const TriangleMesh& mesh, DiameterEstimate estimate) {
  return estimate == DiameterEstimate::Geodesic ? estimate_geodesic_diameter(mesh)
                                                : bounding_box_diagonal(mesh);
}

std::vector<double> geodesic_errors(std::span<const Index> pred, std::span<const Index> truth,
                                    const TriangleMesh& mesh, double diameter) {
  if (pred.size() != truth.size()) throw ShapeError("prediction and truth lengths differ");
  if (!(diameter > 0.0)) throw Error("diameter must be positive");
  const Index n = mesh.vertex_count();
  std::map<Index, std::vector<std::size_t>> by_truth;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= n || truth[i] < 0 || truth[i] >= n)
      throw Error("vertex index out of range in correspondence");
    if (pred[i] != truth[i]) by_truth[truth[i]].push_back(i);
  }
  std::vector<double> errors(truth.size(), 0.0);
  for (const auto& [source, rows] : by_truth) {
    const std::vector<double> dist = geodesic_distances(mesh, source);
    for (std::size_t i : rows) errors[i] = dist[pred[i]] / diameter;
  }
  return errors;
}

GeodesicErrorCurve geodesic_error_curve(std::span<const Index> pred, std::span<const Index> truth,
                                        const TriangleMesh& mesh, DiameterEstimate estimate) {
  return GeodesicErrorCurve(geodesic_errors(pred, truth, mesh, mesh_diameter(mesh, estimate)));
}

double exact_match_accuracy(std::span<const Index> pred, std::span<const Index> truth) {
  if (pred.size() != truth.size()) throw ShapeError("prediction and truth lengths differ");
  if (pred.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

int ClassificationReport::total() const { return std::accumulate(support.begin(), support.end(), 0); }

void ClassificationReport::write_table(std::ostream& out) const {
  out << "class,support,correct,accuracy\n";
  for (std::size_t c = 0; c < confusion.size(); ++c)
    out << c << ',' << support[c] << ',' << confusion[c][c] << ','
        << text::format_double(per_class_accuracy[c]) << '\n';
  out << "mean,," << ',' << text::format_double(mean_class_accuracy) << '\n';
}

ClassificationReport classification_report(std::span<const int> pred, std::span<const int> truth,
                                            int classes) {
  if (pred.size() != truth.size()) throw ShapeError("prediction and truth lengths differ");
  ClassificationReport r;
  r.confusion.assign(classes, std::vector<int>(classes, 0));
  r.support.assign(classes, 0);
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || pred[i] < 0 || pred[i] >= classes)
      throw Error("class label out of range");
    ++r.confusion[truth[i]][pred[i]];
    ++r.support[truth[i]];
    correct += pred[i] == truth[i];
  }
  double sum = 0.0;
  int populated = 0;
  r.per_class_accuracy.assign(classes, std::numeric_limits<double>::quiet_NaN());
  for (int c = 0; c < classes; ++c) {
    if (r.support[c] == 0) continue;
    r.per_class_accuracy[c] = static_cast<double>(r.confusion[c][c]) / r.support[c];
    sum += r.per_class_accuracy[c];
    ++populated;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.accuracy = pred.empty() ? nan : static_cast<double>(correct) / static_cast<double>(pred.size());
  r.mean_class_accuracy = populated ? sum / populated : nan;
  return r;
}

ErrorStats error_stats(std::vector<double> values) {
  ErrorStats s;
  s.count = values.size();
  if (values.empty()) {
    s.mean = s.stddev = s.median = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / n);
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) {
    s.median = upper;
  } else {
    const double lower = *std::max_element(values.begin(), values.begin() + mid);
    s.median = 0.5 * (lower + upper);
  }
  return s;
}

}  // namespace spiralmesh
