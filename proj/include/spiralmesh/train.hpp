#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spiralmesh/layers.hpp"
#include "spiralmesh/metrics.hpp"
#include "spiralmesh/synthetic.hpp"

namespace spiralmesh {

struct TrainConfig {
  double lr = 1e-3;
  double lr_decay = 1.0;  // multiplier applied after every epoch
  double weight_decay = 0.0;
  double dropout = 0.5;
  int batch_size = 1;
  int epochs = 100;
  std::uint64_t seed = 0;
  int spiral_length = 9;
  int dilation = 1;
  int threads = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

TrainConfig correspondence_defaults();
TrainConfig classifier_defaults();
TrainConfig autoencoder_defaults();

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_metric = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

using EpochObserver = std::function<void(const EpochLog&)>;

struct TrainResult {
  std::vector<EpochLog> log;
  double initial_loss = 0.0;  // eval-mode loss on the training split before any update
  double final_loss = 0.0;    // same, after the last epoch
  std::vector<std::string> warnings;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// The last `test_count` samples form the test split.
Split split_tail(std::size_t count, std::size_t test_count);
/// The last `test_per_class` samples of every class form the test split.
Split split_per_class(std::span<const int> labels, int classes, std::size_t test_per_class);

/// Sample positions stacked vertex-major into a (k * n) x 3 matrix.
Matrix stack_samples(const SyntheticShapeSet& set, std::span<const std::size_t> indices);

// Correspondence: every vertex is classified as its template index.

ModelSpec correspondence_spec(const SyntheticShapeSet& set, const TrainConfig& cfg,
                              int width_divisor = 1);

struct CorrespondenceEval {
  double accuracy = 0.0;  // exact index matches over all evaluated vertices
  GeodesicErrorCurve curve;
};

TrainResult train_correspondence(Model& model, const SyntheticShapeSet& set, const Split& split,
                                 const TrainConfig& cfg, const EpochObserver& observer = {});

CorrespondenceEval evaluate_correspondence(Model& model, const SyntheticShapeSet& set,
                                           std::span<const std::size_t> indices,
                                           DiameterEstimate estimate = DiameterEstimate::Geodesic,
                                           int batch_size = 8);

// Classification of labeled shapes.

ModelSpec classifier_spec(const SyntheticShapeSet& set, std::span<const DecimationLevel> levels,
                          const TrainConfig& cfg);

/// Empty when the split is balanced and has at least two classes.
std::vector<std::string> class_balance_warnings(const SyntheticShapeSet& set, const Split& split);

TrainResult train_classifier(Model& model, const SyntheticShapeSet& set, const Split& split,
                             const TrainConfig& cfg, const EpochObserver& observer = {});

ClassificationReport evaluate_classifier(Model& model, const SyntheticShapeSet& set,
                                         std::span<const std::size_t> indices, int batch_size = 32);

// Autoencoding. The network sees positions centered on the training mean
// shape and divided by one global scale; errors are reported in mesh units.

struct ShapeNormalization {
  Matrix mean;        // n x 3
  double scale = 1.0;

  Matrix apply(const Points& p) const;
};

ShapeNormalization shape_normalization(const SyntheticShapeSet& set,
                                       std::span<const std::size_t> train);

ModelSpec autoencoder_spec(std::span<const DecimationLevel> levels, const TrainConfig& cfg,
                           int latent = 16);

TrainResult train_autoencoder(Model& model, const ShapeNormalization& norm,
                              const SyntheticShapeSet& set, const Split& split,
                              const TrainConfig& cfg, const EpochObserver& observer = {});

/// Per-vertex Euclidean reconstruction errors over every vertex of every
/// evaluated sample.
ErrorStats evaluate_autoencoder(Model& model, const ShapeNormalization& norm,
                                const SyntheticShapeSet& set, std::span<const std::size_t> indices,
                                int batch_size = 32);

/// Errors of predicting the training mean shape for every sample in `indices`.
ErrorStats mean_shape_baseline(const ShapeNormalization& norm, const SyntheticShapeSet& set,
                               std::span<const std::size_t> indices);

}  // namespace spiralmesh
