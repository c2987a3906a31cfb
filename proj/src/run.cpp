#include "spiralmesh/run.hpp"

#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "spiralmesh/checkpoint.hpp"
#include "spiralmesh/error.hpp"
#include "spiralmesh/text.hpp"

namespace spiralmesh {

using nlohmann::json;

std::string git_blob_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int size = 0;
  if (!EVP_Digest(blob.data(), blob.size(), digest, &size, EVP_sha1(), nullptr))
    throw Error("SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < size; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return git_blob_hash(buffer.str());
}

namespace {

TriangleMesh load_template(const RunConfig& c, json& inputs) {
  if (!c.mesh) return make_icosphere(c.synthetic.subdivisions);
  if (!std::filesystem::exists(*c.mesh)) throw ConfigError("/mesh", "no such file: " + c.mesh->string());
  inputs[c.mesh->generic_string()] = git_blob_hash_file(*c.mesh);
  TriangleMesh mesh = load_mesh(*c.mesh);
  const ValidationReport report = validate(mesh);
  if (!report.is_edge_manifold) {
    const auto& e = report.non_manifold_edges.front();
    throw TopologyError(e.first, "edge to vertex " + std::to_string(e.second) +
                                     " is shared by more than two faces");
  }
  return mesh;
}

std::vector<DecimationLevel> load_levels(const RunConfig& c, const TriangleMesh& templ, json& inputs,
                                         int threads) {
  if (!c.hierarchy) return build_hierarchy(templ, c.pool_factors, threads);
  if (!std::filesystem::exists(*c.hierarchy))
    throw ConfigError("/hierarchy", "no such file: " + c.hierarchy->string());
  inputs[c.hierarchy->generic_string()] = git_blob_hash_file(*c.hierarchy);
  std::vector<DecimationLevel> levels = load_hierarchy(*c.hierarchy);
  if (levels.empty() || levels.front().fine_count() != templ.vertex_count())
    throw ShapeError("hierarchy does not start at the template's " +
                     std::to_string(templ.vertex_count()) + " vertices");
  return levels;
}

std::string csv_double(double v) { return text::format_double(v); }

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

json curve_summary(const GeodesicErrorCurve& curve) {
  return {{"at_0", curve(0.0)}, {"at_0.01", curve(0.01)}, {"at_0.05", curve(0.05)}, {"at_0.1", curve(0.1)}};
}

json stats_json(const ErrorStats& s) {
  return {{"mean", s.mean}, {"std", s.stddev}, {"median", s.median}, {"count", s.count}};
}

json report_json(const ClassificationReport& r) {
  return {{"accuracy", r.accuracy},
          {"mean_class_accuracy", r.mean_class_accuracy},
          {"per_class_accuracy", r.per_class_accuracy},
          {"confusion", r.confusion}};
}

std::vector<std::size_t> select_split(const Split& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "test") return split.test;
  if (name == "all") {
    std::vector<std::size_t> all = split.train;
    all.insert(all.end(), split.test.begin(), split.test.end());
    std::sort(all.begin(), all.end());
    return all;
  }
  throw ConfigError("--split", "must be train, test or all (got '" + name + "')");
}

}  // namespace

PreparedRun prepare_run(const RunConfig& config, int threads) {
  PreparedRun run;
  run.config = config;
  const RunConfig& c = run.config;
  const TriangleMesh templ = load_template(c, run.inputs);
  const SyntheticConfig& s = c.synthetic;
  switch (c.task) {
    case Task::Correspondence:
      run.set = make_deformation_set(templ, s.samples, s.amplitude, s.seed);
      run.split = split_tail(run.set.size(), s.test_samples);
      run.spec = correspondence_spec(run.set, c.train, c.width_divisor);
      break;
    case Task::Classify:
      run.set = make_classification_set(templ, s.classes, s.samples, s.amplitude, s.seed);
      run.split = split_per_class(run.set.labels, run.set.class_count, s.test_samples);
      run.levels = load_levels(c, templ, run.inputs, threads);
      run.spec = classifier_spec(run.set, run.levels, c.train);
      break;
    case Task::Autoencode:
      run.set = make_deformation_set(templ, s.samples, s.amplitude, s.seed);
      run.split = split_tail(run.set.size(), s.test_samples);
      run.levels = load_levels(c, templ, run.inputs, threads);
      run.spec = autoencoder_spec(run.levels, c.train, c.latent);
      run.normalization = shape_normalization(run.set, run.split.train);
      break;
  }
  return run;
}

json train_run(const RunConfig& config, std::ostream& log, int threads,
               const std::optional<std::filesystem::path>& config_file) {
  PreparedRun run = prepare_run(config, threads);
  const RunConfig& c = run.config;
  if (config_file) run.inputs[config_file->lexically_normal().generic_string()] = git_blob_hash_file(*config_file);
  std::filesystem::create_directories(c.output_dir);

  TrainConfig cfg = c.train;
  cfg.threads = threads;
  Model model(run.spec, run.set.templ, run.levels, cfg.seed, threads);
  log << to_string(c.task) << ": " << model.parameter_count() << " parameters, "
      << run.split.train.size() << " train / " << run.split.test.size() << " test samples, " << threads << " thread(s)\n";

  std::ostringstream metrics_csv;
  metrics_csv << "epoch,train_loss,val_metric,lr,seconds\n";
  auto observer = [&](const EpochLog& e) {
    metrics_csv << e.epoch << ',' << csv_double(e.train_loss) << ',' << csv_double(e.val_metric) << ','
                << csv_double(e.lr) << ',' << csv_double(e.seconds) << '\n';
    log << "epoch " << e.epoch << "  loss " << csv_double(e.train_loss) << "  val "
        << csv_double(e.val_metric) << "  lr " << csv_double(e.lr) << "  " << e.seconds << " s\n";
  };

  json metrics;
  TrainResult result;
  switch (c.task) {
    case Task::Correspondence: {
      result = train_correspondence(model, run.set, run.split, cfg, observer);
      const CorrespondenceEval train = evaluate_correspondence(model, run.set, run.split.train, c.diameter);
      metrics["train_accuracy"] = train.accuracy;
      std::optional<CorrespondenceEval> test;
      if (!run.split.test.empty()) {
        test = evaluate_correspondence(model, run.set, run.split.test, c.diameter);
        metrics["test_accuracy"] = test->accuracy;
        metrics["test_curve"] = curve_summary(test->curve);
      }
      std::ostringstream curve;
      (test ? test->curve : train.curve).write_csv(curve);
      write_text(c.output_dir / "curve.csv", curve.str());
      log << "train accuracy " << csv_double(train.accuracy) << '\n';
      if (test) log << "test accuracy " << csv_double(test->accuracy) << '\n';
      break;
    }
    case Task::Classify: {
      result = train_classifier(model, run.set, run.split, cfg, observer);
      for (const std::string& w : result.warnings) log << "warning: " << w << '\n';
      const ClassificationReport train = evaluate_classifier(model, run.set, run.split.train);
      metrics["train"] = report_json(train);
      const ClassificationReport test =
          run.split.test.empty() ? train : evaluate_classifier(model, run.set, run.split.test);
      if (!run.split.test.empty()) metrics["test"] = report_json(test);
      std::ostringstream table;
      test.write_table(table);
      write_text(c.output_dir / "classes.csv", table.str());
      log << table.str();
      break;
    }
    case Task::Autoencode: {
      const ShapeNormalization& norm = *run.normalization;
      result = train_autoencoder(model, norm, run.set, run.split, cfg, observer);
      if (!run.split.test.empty()) {
        const ErrorStats test = evaluate_autoencoder(model, norm, run.set, run.split.test);
        const ErrorStats base = mean_shape_baseline(norm, run.set, run.split.test);
        metrics["test"] = stats_json(test);
        metrics["mean_shape_baseline"] = stats_json(base);
        log << "test error " << csv_double(test.mean) << " +- " << csv_double(test.stddev) << " (median "
            << csv_double(test.median) << "), mean-shape baseline " << csv_double(base.mean) << '\n';
      }
      break;
    }
  }
  metrics["initial_loss"] = result.initial_loss;
  metrics["final_loss"] = result.final_loss;
  if (!result.log.empty()) metrics["final_val_metric"] = result.log.back().val_metric;
  if (!result.warnings.empty()) metrics["warnings"] = result.warnings;

  write_text(c.output_dir / "metrics.csv", metrics_csv.str());
  CheckpointInfo info;
  info.seed = cfg.seed;
  info.epoch = cfg.epochs;
  info.lr = result.log.empty() ? cfg.lr : result.log.back().lr * cfg.lr_decay;
  info.extra = {{"task", to_string(c.task)}, {"model", to_json(run.spec)}};
  save_checkpoint(c.output_dir / "checkpoint", model.parameters(), info);

  json manifest;
  manifest["format"] = "spiralmesh-run-1";
  manifest["config"] = to_json(c);
  manifest["inputs"] = run.inputs;
  manifest["parameter_count"] = model.parameter_count();
  manifest["metrics"] = metrics;
  json outputs = {"checkpoint.json", "checkpoint.bin", "metrics.csv"};
  if (c.task == Task::Correspondence) outputs.push_back("curve.csv");
  if (c.task == Task::Classify) outputs.push_back("classes.csv");
  manifest["outputs"] = outputs;
  write_text(c.output_dir / "manifest.json", manifest.dump(2) + "\n");
  return metrics;
}

json eval_run(const RunConfig& config, const std::filesystem::path& checkpoint, const std::string& split,
              std::ostream& out, int threads) {
  PreparedRun run = prepare_run(config, threads);
  const RunConfig& c = run.config;
  const std::vector<std::size_t> indices = select_split(run.split, split);
  if (indices.empty()) throw ConfigError("--split", "split '" + split + "' is empty");

  Model model(run.spec, run.set.templ, run.levels, c.train.seed, threads);
  const std::filesystem::path stem = checkpoint_stem(checkpoint);
  const CheckpointInfo info = load_checkpoint(stem, model.parameters());
  if (info.extra.contains("model") && model_spec_from_json(info.extra.at("model")) != run.spec)
    throw ShapeError("checkpoint model spec differs from the one the config describes");

  json metrics;
  switch (c.task) {
    case Task::Correspondence: {
      const CorrespondenceEval e = evaluate_correspondence(model, run.set, indices, c.diameter);
      metrics["accuracy"] = e.accuracy;
      metrics["curve"] = curve_summary(e.curve);
      std::filesystem::create_directories(c.output_dir);
      std::ostringstream curve;
      e.curve.write_csv(curve);
      write_text(c.output_dir / ("eval_" + split + "_curve.csv"), curve.str());
      out << "accuracy " << csv_double(e.accuracy) << '\n';
      break;
    }
    case Task::Classify: {
      const ClassificationReport r = evaluate_classifier(model, run.set, indices);
      metrics = report_json(r);
      r.write_table(out);
      out << "accuracy " << csv_double(r.accuracy) << '\n';
      out << "mean_class_accuracy " << csv_double(r.mean_class_accuracy) << '\n';
      break;
    }
    case Task::Autoencode: {
      const ErrorStats e = evaluate_autoencoder(model, *run.normalization, run.set, indices);
      const ErrorStats base = mean_shape_baseline(*run.normalization, run.set, indices);
      metrics = stats_json(e);
      metrics["mean_shape_baseline"] = stats_json(base);
      out << "mean " << csv_double(e.mean) << " std " << csv_double(e.stddev) << " median "
          << csv_double(e.median) << " baseline " << csv_double(base.mean) << '\n';
      break;
    }
  }
  return metrics;
}

}  // namespace spiralmesh
