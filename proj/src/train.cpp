#include "spiralmesh/train.hpp"

#include <chrono>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <cmath>
#include <limits>
#include <numeric>

#include "spiralmesh/error.hpp"
#include "spiralmesh/optim.hpp"
#include "spiralmesh/random.hpp"

namespace spiralmesh {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr", "must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train.lr_decay", "must be in (0, 1]");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay", "must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train.dropout", "must be in [0, 1)");
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be at least 1");
  if (epochs < 0) throw ConfigError("train.epochs", "must be non-negative");
  if (spiral_length < 1) throw ConfigError("spiral_length", "must be at least 1");
  if (dilation < 1) throw ConfigError("dilation", "must be at least 1");
  if (threads < 1) throw ConfigError("threads", "must be at least 1");
}

TrainConfig correspondence_defaults() {
  TrainConfig c;
  c.lr = 3e-3;
  c.lr_decay = 1.0;
  c.batch_size = 1;
  c.epochs = 100;
  c.spiral_length = 10;
  return c;
}

TrainConfig classifier_defaults() {
  TrainConfig c;
  c.lr = 1e-3;
  c.lr_decay = 0.99;
  c.weight_decay = 5e-4;
  c.batch_size = 32;
  c.epochs = 300;
  c.spiral_length = 9;
  return c;
}

TrainConfig autoencoder_defaults() {
  TrainConfig c = classifier_defaults();
  c.weight_decay = 0.0;
  return c;
}

Split split_tail(std::size_t count, std::size_t test_count) {
  if (test_count > count) throw Error("test split larger than the dataset");
  Split s;
  for (std::size_t i = 0; i < count; ++i) (i + test_count < count ? s.train : s.test).push_back(i);
  return s;
}

Split split_per_class(std::span<const int> labels, int classes, std::size_t test_per_class) {
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) throw Error("class label out of range");
    members[labels[i]].push_back(i);
  }
  std::vector<char> is_test(labels.size(), 0);
  for (const auto& m : members) {
    if (m.size() < test_per_class) throw Error("class has fewer samples than the test split");
    for (std::size_t k = m.size() - test_per_class; k < m.size(); ++k) is_test[m[k]] = 1;
  }
  Split s;
  for (std::size_t i = 0; i < labels.size(); ++i) (is_test[i] ? s.test : s.train).push_back(i);
  return s;
}

Matrix stack_samples(const SyntheticShapeSet& set, std::span<const std::size_t> indices) {
  const Eigen::Index n = set.templ.vertex_count();
  Matrix out(n * static_cast<Eigen::Index>(indices.size()), 3);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Points& p = set.samples.at(indices[k]);
    if (p.rows() != n) throw ShapeError("sample vertex count differs from the template");
    out.middleRows(static_cast<Eigen::Index>(k) * n, n) = p;
  }
  return out;
}

namespace {

template <typename Fn>
void for_each_batch(std::span<const std::size_t> indices, int batch_size, Fn&& fn) {
  for (std::size_t start = 0; start < indices.size(); start += batch_size)
    fn(indices.subspan(start, std::min<std::size_t>(batch_size, indices.size() - start)));
}

// BatchLoss: (Graph&, span<const size_t>, bool training, Rng&) -> Var (1x1).
template <typename BatchLoss, typename Validate>
TrainResult fit(Model& model, std::span<const std::size_t> train, const TrainConfig& cfg,
                BatchLoss&& batch_loss, Validate&& validate, const EpochObserver& observer) {
  cfg.validate();
  if (train.empty()) throw Error("training split is empty");
#if defined(__GLIBC__)
  // Activations of large meshes exceed glibc's mmap ceiling; served by mmap
  // they would be unmapped and page-faulted in again on every batch.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  Rng shuffle_rng(derive_seed(cfg.seed, 1));
  Rng dropout_rng(derive_seed(cfg.seed, 2));

  auto eval_loss = [&] {
    double total = 0.0;
    Rng unused(0);
    for_each_batch(train, cfg.batch_size, [&](std::span<const std::size_t> batch) {
      Graph g;
      total += batch_loss(g, batch, false, unused).value()(0, 0) * static_cast<double>(batch.size());
    });
    return total / static_cast<double>(train.size());
  };

  TrainResult result;
  result.initial_loss = eval_loss();
  AdamOptions adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;
  std::vector<std::size_t> order(train.begin(), train.end());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for_each_batch(order, cfg.batch_size, [&](std::span<const std::size_t> batch) {
      Graph g;
      Var loss = batch_loss(g, batch, true, dropout_rng);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) throw NumericError(epoch);
      g.backward(loss);
      adam_step(model.parameters(), adam);
      zero_grad(model.parameters());
      total += value * static_cast<double>(batch.size());
    });
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = total / static_cast<double>(order.size());
    entry.lr = adam.lr;
    entry.val_metric = validate();
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(entry);
    if (observer) observer(entry);
    adam.lr *= cfg.lr_decay;
  }
  result.final_loss = eval_loss();
  if (!std::isfinite(result.final_loss)) throw NumericError(cfg.epochs);
  return result;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<Index> argmax_rows(const Matrix& m) {
  std::vector<Index> out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best;
    m.row(r).maxCoeff(&best);
    out[r] = static_cast<Index>(best);
  }
  return out;
}

}  // namespace

ModelSpec correspondence_spec(const SyntheticShapeSet& set, const TrainConfig& cfg,
                              int width_divisor) {
  ModelSpec spec = build_correspondence_net(set.templ.vertex_count(), cfg.spiral_length,
                                            width_divisor, cfg.dilation);
  spec.dropout_p = cfg.dropout;
  return spec;
}

TrainResult train_correspondence(Model& model, const SyntheticShapeSet& set, const Split& split,
                                 const TrainConfig& cfg, const EpochObserver& observer) {
  const Index n = set.templ.vertex_count();
  std::vector<Index> labels;
  auto loss = [&](Graph& g, std::span<const std::size_t> batch, bool training, Rng& rng) {
    labels.resize(static_cast<std::size_t>(n) * batch.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<Index>(i % n);
    Var logits = model.forward(g, stack_samples(set, batch), static_cast<Eigen::Index>(batch.size()),
                               training, rng);
    return softmax_cross_entropy(logits, labels);
  };
  auto validate = [&] {
    return split.test.empty() ? kNaN : evaluate_correspondence(model, set, split.test).accuracy;
  };
  return fit(model, split.train, cfg, loss, validate, observer);
}

CorrespondenceEval evaluate_correspondence(Model& model, const SyntheticShapeSet& set,
                                           std::span<const std::size_t> indices,
                                           DiameterEstimate estimate, int batch_size) {
  const Index n = set.templ.vertex_count();
  std::vector<Index> truth(n);
  std::iota(truth.begin(), truth.end(), 0);
  std::vector<double> errors;
  std::size_t hits = 0, total = 0;
  Rng unused(0);
  for_each_batch(indices, batch_size, [&](std::span<const std::size_t> batch) {
    Graph g;
    const Var logits = model.forward(g, stack_samples(set, batch),
                                     static_cast<Eigen::Index>(batch.size()), false, unused);
    const std::vector<Index> pred = argmax_rows(logits.value());
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const std::span<const Index> p(pred.data() + k * n, n);
      for (Index v = 0; v < n; ++v) hits += p[v] == v;
      total += n;
      // Geodesic error is measured on the shape itself.
      const TriangleMesh shape = set.mesh(batch[k]);
      const std::vector<double> e = geodesic_errors(p, truth, shape, mesh_diameter(shape, estimate));
      errors.insert(errors.end(), e.begin(), e.end());
    }
  });
  CorrespondenceEval out;
  out.accuracy = total ? static_cast<double>(hits) / static_cast<double>(total) : kNaN;
  out.curve = GeodesicErrorCurve(std::move(errors));
  return out;
}

ModelSpec classifier_spec(const SyntheticShapeSet& set, std::span<const DecimationLevel> levels,
                          const TrainConfig& cfg) {
  ModelSpec spec = build_classifier_net(levels, std::max(set.class_count, 1), cfg.spiral_length,
                                        cfg.dilation);
  spec.dropout_p = cfg.dropout;
  return spec;
}

std::vector<std::string> class_balance_warnings(const SyntheticShapeSet& set, const Split& split) {
  std::vector<std::string> warnings;
  if (set.labels.size() != set.size()) throw Error("classification set needs one label per sample");
  std::vector<int> counts(std::max(set.class_count, 1), 0);
  for (std::size_t i : split.train) ++counts.at(set.labels[i]);
  int present = 0;
  for (int c : counts) present += c > 0;
  if (present < 2)
    warnings.push_back("degenerate setup: training split has " + std::to_string(present) +
                       " class(es), accuracy is trivially 100%");
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*lo != *hi)
    warnings.push_back("unbalanced classes: training counts range from " + std::to_string(*lo) +
                       " to " + std::to_string(*hi));
  return warnings;
}

TrainResult train_classifier(Model& model, const SyntheticShapeSet& set, const Split& split,
                             const TrainConfig& cfg, const EpochObserver& observer) {
  std::vector<std::string> warnings = class_balance_warnings(set, split);
  std::vector<Index> labels;
  auto loss = [&](Graph& g, std::span<const std::size_t> batch, bool training, Rng& rng) {
    labels.clear();
    for (std::size_t i : batch) labels.push_back(set.labels[i]);
    Var logits = model.forward(g, stack_samples(set, batch), static_cast<Eigen::Index>(batch.size()),
                               training, rng);
    return softmax_cross_entropy(logits, labels);
  };
  auto validate = [&] {
    return split.test.empty() ? kNaN : evaluate_classifier(model, set, split.test).mean_class_accuracy;
  };
  TrainResult result = fit(model, split.train, cfg, loss, validate, observer);
  result.warnings = std::move(warnings);
  return result;
}

ClassificationReport evaluate_classifier(Model& model, const SyntheticShapeSet& set,
                                         std::span<const std::size_t> indices, int batch_size) {
  std::vector<int> pred, truth;
  Rng unused(0);
  for_each_batch(indices, batch_size, [&](std::span<const std::size_t> batch) {
    Graph g;
    const Var logits = model.forward(g, stack_samples(set, batch),
                                     static_cast<Eigen::Index>(batch.size()), false, unused);
    for (Index p : argmax_rows(logits.value())) pred.push_back(p);
    for (std::size_t i : batch) truth.push_back(set.labels.at(i));
  });
  return classification_report(pred, truth, std::max(set.class_count, 1));
}

Matrix ShapeNormalization::apply(const Points& p) const {
  if (p.rows() != mean.rows()) throw ShapeError("sample vertex count differs from the template");
  return (p - mean) / scale;
}

ShapeNormalization shape_normalization(const SyntheticShapeSet& set,
                                       std::span<const std::size_t> train) {
  if (train.empty()) throw Error("training split is empty");
  ShapeNormalization norm;
  norm.mean = Matrix::Zero(set.templ.vertex_count(), 3);
  for (std::size_t i : train) norm.mean += set.samples.at(i);
  norm.mean /= static_cast<double>(train.size());
  double ss = 0.0;
  for (std::size_t i : train) ss += (set.samples[i] - norm.mean).squaredNorm();
  const double count = static_cast<double>(train.size()) * static_cast<double>(norm.mean.size());
  const double sd = std::sqrt(ss / count);
  norm.scale = sd > 0.0 ? sd : 1.0;
  return norm;
}

ModelSpec autoencoder_spec(std::span<const DecimationLevel> levels, const TrainConfig& cfg,
                           int latent) {
  ModelSpec spec = build_autoencoder(levels, latent, cfg.spiral_length, cfg.dilation);
  spec.dropout_p = cfg.dropout;
  return spec;
}

namespace {

Matrix stack_normalized(const ShapeNormalization& norm, const SyntheticShapeSet& set,
                        std::span<const std::size_t> indices) {
  const Eigen::Index n = norm.mean.rows();
  Matrix out(n * static_cast<Eigen::Index>(indices.size()), 3);
  for (std::size_t k = 0; k < indices.size(); ++k)
    out.middleRows(static_cast<Eigen::Index>(k) * n, n) = norm.apply(set.samples.at(indices[k]));
  return out;
}

}  // namespace

TrainResult train_autoencoder(Model& model, const ShapeNormalization& norm,
                              const SyntheticShapeSet& set, const Split& split,
                              const TrainConfig& cfg, const EpochObserver& observer) {
  auto loss = [&](Graph& g, std::span<const std::size_t> batch, bool training, Rng& rng) {
    const Matrix x = stack_normalized(norm, set, batch);
    Var y = model.forward(g, x, static_cast<Eigen::Index>(batch.size()), training, rng);
    return mean_euclidean_distance(y, x);
  };
  auto validate = [&] {
    return split.test.empty() ? kNaN : evaluate_autoencoder(model, norm, set, split.test).mean;
  };
  return fit(model, split.train, cfg, loss, validate, observer);
}

ErrorStats evaluate_autoencoder(Model& model, const ShapeNormalization& norm,
                                const SyntheticShapeSet& set, std::span<const std::size_t> indices,
                                int batch_size) {
  std::vector<double> errors;
  const Eigen::Index n = norm.mean.rows();
  Rng unused(0);
  for_each_batch(indices, batch_size, [&](std::span<const std::size_t> batch) {
    Graph g;
    const Var y = model.forward(g, stack_normalized(norm, set, batch),
                                static_cast<Eigen::Index>(batch.size()), false, unused);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const Matrix recon = y.value().middleRows(static_cast<Eigen::Index>(k) * n, n) * norm.scale + norm.mean;
      const Matrix diff = recon - set.samples[batch[k]];
      for (Eigen::Index v = 0; v < n; ++v) errors.push_back(diff.row(v).norm());
    }
  });
  return error_stats(std::move(errors));
}

ErrorStats mean_shape_baseline(const ShapeNormalization& norm, const SyntheticShapeSet& set,
                               std::span<const std::size_t> indices) {
  std::vector<double> errors;
  for (std::size_t i : indices) {
    const Matrix diff = set.samples.at(i) - norm.mean;
    for (Eigen::Index v = 0; v < diff.rows(); ++v) errors.push_back(diff.row(v).norm());
  }
  return error_stats(std::move(errors));
}

}  // namespace spiralmesh
