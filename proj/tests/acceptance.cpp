#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "separability.hpp"
#include "spiralmesh/checkpoint.hpp"
#include "spiralmesh/config.hpp"
#include "spiralmesh/decimate.hpp"
#include "spiralmesh/error.hpp"
#include "spiralmesh/layers.hpp"
#include "spiralmesh/optim.hpp"
#include "spiralmesh/run.hpp"
#include "spiralmesh/spiral.hpp"
#include "spiralmesh/train.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace spiralmesh;
using testing::GradCheckResult;
using testing::random_matrix;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

RunConfig bundled_config(const std::string& name) {
  RunConfig c = load_run_config(fs::path(SPIRALMESH_SOURCE_DIR) / "configs" / name);
  c.output_dir = fs::temp_directory_path() / "spiralmesh_acceptance" / name;
  return c;
}

// Hop distance from v over the raw face list.
std::vector<int> bfs_oracle(const TriangleMesh& m, Index v) {
  std::vector<std::set<Index>> adj(m.vertex_count());
  for (const Face& f : m.faces())
    for (int a = 0; a < 3; ++a) {
      adj[f[a]].insert(f[(a + 1) % 3]);
      adj[f[(a + 1) % 3]].insert(f[a]);
    }
  std::vector<int> d(m.vertex_count(), -1);
  std::deque<Index> queue{v};
  d[v] = 0;
  while (!queue.empty()) {
    const Index u = queue.front();
    queue.pop_front();
    for (Index w : adj[u])
      if (d[w] < 0) {
        d[w] = d[u] + 1;
        queue.push_back(w);
      }
  }
  return d;
}

bool row_invariants(const SpiralTable& t, Index v) {
  std::set<Index> seen;
  bool sentinel = false;
  if (t.indices(v, 0) != v) return false;
  for (int j = 0; j < t.length; ++j) {
    const Index e = t.indices(v, j);
    if (e == kSentinel) {
      sentinel = true;
      continue;
    }
    if (sentinel || e < 0 || e >= t.vertex_count() || !seen.insert(e).second) return false;
  }
  return true;
}

bool ring_containment(const TriangleMesh& m, Index v, int l) {
  const std::vector<Index> s = build_spiral(m, v, l);
  const std::vector<int> hops = bfs_oracle(m, v);
  int last = 0;
  std::vector<int> touched(m.vertex_count() + 1, 0);
  for (Index e : s) {
    if (e == kSentinel) continue;
    if (hops[e] < last) return false;
    last = hops[e];
    ++touched[hops[e]];
  }
  std::vector<int> layer_size(m.vertex_count() + 1, 0);
  for (int h : hops)
    if (h >= 0) ++layer_size[h];
  for (int k = 0; k < last; ++k)
    if (touched[k] != layer_size[k]) return false;
  return true;
}

Outcome parameter_count_check() {
  Outcome o;
  const std::size_t count = parameter_count(build_correspondence_net(6890, 10));
  o.detail << "parameters " << count;
  o.require(count == 1911562, "expected 1911562");
  return o;
}

Outcome spiral_structure_check() {
  Outcome o;
  std::vector<TriangleMesh> meshes;
  for (int s = 0; s <= 3; ++s) meshes.push_back(make_icosphere(s));
  std::size_t rows = 0;
  for (const TriangleMesh& m : meshes)
    for (int l : {6, 9, 10, 13})
      for (int d : {1, 2}) {
        const SpiralTable a = build_spiral_table(m, l, d, 1);
        o.require(a == build_spiral_table(m, l, d, 1), "rebuild differs");
        o.require(a == build_spiral_table(m, l, d, 4), "thread count changes table");
        for (Index v = 0; v < m.vertex_count(); ++v) {
          o.require(row_invariants(a, v), "row invariant");
          ++rows;
        }
      }
  Rng rng(2024);
  int pairs = 0;
  for (; pairs < 100; ++pairs) {
    const TriangleMesh& m = meshes[rng.uniform_index(meshes.size())];
    const Index v = static_cast<Index>(rng.uniform_index(m.vertex_count()));
    const int l = 1 + static_cast<int>(rng.uniform_index(80));
    o.require(ring_containment(m, v, l), "ring containment");
  }
  o.detail << rows << " rows checked, " << pairs << " ring-containment pairs";
  return o;
}

Outcome dilation_check() {
  Outcome o;
  std::size_t rows = 0;
  for (int s = 0; s <= 4; ++s) {
    const TriangleMesh m = make_icosphere(s);
    const SpiralTable dilated = build_spiral_table(m, 9, 2);
    const SpiralTable plain = build_spiral_table(m, 18, 1);
    for (Index v = 0; v < m.vertex_count(); ++v, ++rows)
      for (int j = 0; j < 9; ++j) o.require(dilated.indices(v, j) == plain.indices(v, 2 * j), "stride-2 row");
  }
  const std::vector<double> factors{4, 4, 4, 4};
  const std::vector<DecimationLevel> levels = build_hierarchy(make_icosphere(4), factors);
  const std::size_t p1 = parameter_count(build_autoencoder(levels, 16, 9, 1));
  const std::size_t p2 = parameter_count(build_autoencoder(levels, 16, 9, 2));
  o.require(p1 == p2, "autoencoder parameter counts differ");
  o.detail << rows << " dilated rows; autoencoder parameters d=1 " << p1 << " d=2 " << p2;
  return o;
}

Var readout(Var x) {
  Rng rng(99);
  return mean_squared_error(x, random_matrix(x.rows(), x.cols(), rng));
}

IndexMatrix random_spirals(Eigen::Index n, int l, Rng& rng) {
  IndexMatrix idx(n, l);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < l; ++j)
      idx(i, j) = (j > 0 && rng.uniform() < 0.2) ? kSentinel : static_cast<Index>(rng.uniform_index(n));
  return idx;
}

Outcome gradient_check() {
  using testing::check_gradients;
  using V = std::span<const Var>;
  Outcome o;
  Rng rng(17);
  const Matrix a = random_matrix(5, 4, rng), b = random_matrix(4, 3, rng), a2 = random_matrix(5, 4, rng);
  const Matrix bias = random_matrix(1, 4, rng), side = random_matrix(5, 2, rng);
  const IndexMatrix spirals = random_spirals(5, 4, rng);
  const SparseMatrix s(3, 5, {{0, 1, 1.0}, {1, 4, 0.5}, {1, 0, 0.25}, {2, 2, -2.0}});
  const std::vector<Index> labels{1, 0, 3, 2, 2};
  const Matrix target = random_matrix(5, 4, rng);

  std::vector<std::pair<std::string, GradCheckResult>> results;
  auto check = [&](const std::string& name, std::vector<Matrix> inputs, const testing::GraphBuilder& f) {
    results.emplace_back(name, check_gradients(std::move(inputs), f));
  };
  check("matmul", {a, b}, [](Graph&, V v) { return readout(matmul(v[0], v[1])); });
  check("add", {a, a2}, [](Graph&, V v) { return readout(add(v[0], v[1])); });
  check("add_bias", {a, bias}, [](Graph&, V v) { return readout(add_bias(v[0], v[1])); });
  check("scale", {a}, [](Graph&, V v) { return readout(scale(v[0], 1.7)); });
  check("sum", {a}, [](Graph&, V v) { return sum(elu(v[0])); });
  check("reshape", {a}, [](Graph&, V v) { return readout(reshape(v[0], 10, 2)); });
  check("gather_rows", {a}, [&](Graph&, V v) { return readout(gather_rows(v[0], spirals)); });
  check("gather_affine(f>c)", {a, random_matrix(16, 2, rng), random_matrix(1, 2, rng)},
      [&](Graph&, V v) { return readout(gather_affine(v[0], spirals, v[1], v[2])); });
  check("gather_affine(f<=c)", {a, random_matrix(16, 6, rng), random_matrix(1, 6, rng)},
      [&](Graph&, V v) { return readout(gather_affine(v[0], spirals, v[1], v[2])); });
  check("gather_affine(f>c, elu)", {a, random_matrix(16, 2, rng), random_matrix(1, 2, rng)},
      [&](Graph&, V v) { return readout(gather_affine(v[0], spirals, v[1], v[2], 1, Activation::Elu)); });
  check("gather_affine(f<=c, elu)", {a, random_matrix(16, 6, rng), random_matrix(1, 6, rng)},
      [&](Graph&, V v) { return readout(gather_affine(v[0], spirals, v[1], v[2], 1, Activation::Elu)); });
  check("concat_cols", {a, side}, [](Graph&, V v) {
    const Var parts[] = {v[0], v[1]};
    return readout(concat_cols(parts));
  });
  check("elu", {a}, [](Graph&, V v) { return readout(elu(v[0])); });
  check("dropout", {a}, [](Graph&, V v) {
    Rng fixed(5);
    return readout(dropout(v[0], 0.5, true, fixed));
  });
  check("sparse_apply", {a}, [&](Graph&, V v) { return readout(sparse_apply(s, v[0])); });
  check("softmax_cross_entropy", {a}, [&](Graph&, V v) { return softmax_cross_entropy(v[0], labels); });
  check("mean_squared_error", {a}, [&](Graph&, V v) { return mean_squared_error(v[0], target); });
  check("mean_euclidean_distance", {a}, [&](Graph&, V v) { return mean_euclidean_distance(v[0], target); });

  const TriangleMesh ico = testing::icosahedron();
  const auto net_loss = [&](Graph& g, Model& model) {
    Rng drop(3);
    std::vector<Index> ids(12);
    std::iota(ids.begin(), ids.end(), 0);
    return softmax_cross_entropy(model.forward(g, deform(ico, 1, 0.1), 1, true, drop), ids);
  };
  Model small(build_correspondence_net(12, 10, 4), ico, {}, 7);
  results.emplace_back("correspondence net (widths/4, all parameters)",
                       testing::check_model_gradients(small, net_loss));
  Model full(build_correspondence_net(12, 10), ico, {}, 7);
  results.emplace_back("correspondence net (full widths, every 37th parameter)",
                       testing::check_model_gradients(full, net_loss, 37));

  double worst = 0.0;
  for (const auto& [name, r] : results) {
    o.require(r.checked > 0 && r.max_rel_error < 1e-4, name + " rel err " + fmt(r.max_rel_error));
    worst = std::max(worst, r.max_rel_error);
  }
  o.detail << results.size() << " checks, worst max relative error " << fmt(worst);
  return o;
}

void check_level_contracts(Outcome& o, const DecimationLevel& level) {
  const Eigen::MatrixXd down(level.down.matrix());
  const Eigen::MatrixXd up(level.up.matrix());
  const Index c = level.coarse_count();
  o.require((down * down.transpose() - Eigen::MatrixXd::Identity(c, c)).cwiseAbs().maxCoeff() == 0.0,
            "down*down^T != I");
  o.require((up.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12, "up row sums");
  const Eigen::VectorXd field = up * Eigen::VectorXd::Constant(c, -3.25);
  o.require((field.array() + 3.25).abs().maxCoeff() <= 1e-12, "up constant field");
  o.require(validate(level.coarse).is_edge_manifold, "coarse mesh not edge-manifold");
}

Outcome decimation_check() {
  Outcome o;
  const DecimationLevel level = decimate(make_icosphere(3), 4.0);
  o.require(level.coarse_count() == 161, "coarse count");
  check_level_contracts(o, level);
  const std::vector<double> factors{4, 4, 4, 4};
  std::vector<Index> counts;
  for (const DecimationLevel& l : build_hierarchy(make_icosphere(4), factors)) {
    check_level_contracts(o, l);
    counts.push_back(l.coarse_count());
  }
  o.require(counts == std::vector<Index>{641, 161, 41, 11}, "icosphere-4 chain");
  o.detail << "icosphere-3 / 4 -> " << level.coarse_count() << "; icosphere-4 chain";
  for (Index n : counts) o.detail << ' ' << n;
  return o;
}

Outcome correspondence_check() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const RunConfig c = bundled_config("correspondence_small.json");
  o.require(c.synthetic.subdivisions == 2 && c.synthetic.samples == 10 && c.synthetic.test_samples == 2 &&
                c.width_divisor == 4 && c.train.lr == 3e-3 && c.train.epochs == 200 && c.train.seed == 7,
            "bundled config differs from the criterion setup");
  PreparedRun run = prepare_run(c);
  Model model(run.spec, run.set.templ, run.levels, c.train.seed);
  const TrainResult r = train_correspondence(model, run.set, run.split, c.train);
  const CorrespondenceEval train = evaluate_correspondence(model, run.set, run.split.train, c.diameter);
  const CorrespondenceEval test = evaluate_correspondence(model, run.set, run.split.test, c.diameter);
  const double elapsed = seconds_since(start);
  o.require(train.accuracy == 1.0, "train accuracy below 100%");
  o.require(test.accuracy >= 0.95, "held-out accuracy below 95%");
  o.require(train.curve(0.0) == train.accuracy && test.curve(0.0) == test.accuracy, "curve(0) != accuracy");
  o.require(r.final_loss < r.initial_loss, "final loss not below initial loss");
  o.require(elapsed < 180.0, "runtime over 3 minutes");
  o.detail << "train accuracy " << fmt(train.accuracy) << ", test accuracy " << fmt(test.accuracy)
           << ", test curve(0) " << fmt(test.curve(0.0)) << ", loss " << fmt(r.initial_loss) << " -> "
           << fmt(r.final_loss) << ", " << fmt(elapsed) << " s";
  return o;
}

Outcome classifier_check() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const RunConfig c = bundled_config("classify.json");
  o.require(c.synthetic.classes == 6 && c.synthetic.samples == 40 && c.synthetic.subdivisions == 3 &&
                c.train.epochs == 100,
            "bundled config differs from the criterion setup");
  PreparedRun run = prepare_run(c);
  const double separability = testing::nearest_centroid_accuracy(run.set);
  o.require(separability == 1.0, "families not linearly separable by the oracle");
  Model model(run.spec, run.set.templ, run.levels, c.train.seed);
  const TrainResult r = train_classifier(model, run.set, run.split, c.train);
  const ClassificationReport report = evaluate_classifier(model, run.set, run.split.test);
  const double elapsed = seconds_since(start);
  o.require(report.mean_class_accuracy >= 0.9, "held-out mean accuracy below 90%");
  o.require(r.final_loss < r.initial_loss, "final loss not below initial loss");
  o.require(r.warnings.empty(), "class balance warnings");
  o.require(elapsed < 300.0, "runtime over 5 minutes");
  o.detail << "separability oracle " << fmt(separability) << ", held-out mean class accuracy "
           << fmt(report.mean_class_accuracy) << " over " << report.total() << " shapes, loss "
           << fmt(r.initial_loss) << " -> " << fmt(r.final_loss) << ", " << fmt(elapsed) << " s";
  return o;
}

struct AutoencoderRun {
  ErrorStats test, baseline;
  TrainResult result;
  std::size_t parameters = 0;
};

AutoencoderRun train_and_score(const RunConfig& c) {
  PreparedRun run = prepare_run(c);
  Model model(run.spec, run.set.templ, run.levels, c.train.seed);
  AutoencoderRun out;
  out.parameters = model.parameter_count();
  out.result = train_autoencoder(model, *run.normalization, run.set, run.split, c.train);
  out.test = evaluate_autoencoder(model, *run.normalization, run.set, run.split.test);
  out.baseline = mean_shape_baseline(*run.normalization, run.set, run.split.test);
  return out;
}

Outcome autoencoder_check() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  RunConfig c = bundled_config("autoencode.json");
  o.require(c.synthetic.subdivisions == 4 && c.synthetic.samples == 200 && c.synthetic.amplitude == 0.2 &&
                c.train.spiral_length == 9 && c.latent == 16 && c.train.epochs == 100,
            "bundled config differs from the criterion setup");
  for (int d : {1, 2}) {
    c.train.dilation = d;
    const auto run_start = std::chrono::steady_clock::now();
    const AutoencoderRun r = train_and_score(c);
    o.require(r.test.mean < r.baseline.mean, "d=" + std::to_string(d) + " not below baseline");
    o.require(r.result.final_loss < r.result.initial_loss, "final loss not below initial loss");
    o.detail << "d=" << d << " error " << fmt(r.test.mean) << " (median " << fmt(r.test.median)
             << ") vs baseline " << fmt(r.baseline.mean) << ", " << r.parameters << " parameters, "
             << fmt(seconds_since(run_start)) << " s; ";
  }
  // Constant targets: a short run is enough to show the error vanishes.
  c.train.dilation = 1;
  c.synthetic.amplitude = 0.0;
  c.train.epochs = 3;
  const AutoencoderRun zero = train_and_score(c);
  o.require(zero.test.mean < 1e-3, "zero-amplitude error");
  const double elapsed = seconds_since(start);
  o.require(elapsed < 420.0, "runtime over 7 minutes");
  o.detail << "zero amplitude error " << fmt(zero.test.mean) << ", " << fmt(elapsed) << " s";
  return o;
}

Outcome persistence_check() {
  Outcome o;
  const fs::path dir = testing::temp_dir("acceptance_persistence");
  const TriangleMesh m = make_icosphere(3);

  const SpiralTable table = build_spiral_table(m, 9, 2);
  save_spiral_table(table, dir / "a.spiral");
  const SpiralTable loaded = load_spiral_table(dir / "a.spiral", m);
  save_spiral_table(loaded, dir / "b.spiral");
  o.require(loaded == table, "spiral table differs after load");
  o.require(testing::read_file(dir / "a.spiral") == testing::read_file(dir / "b.spiral"), "spiral bytes");

  const DecimationLevel level = decimate(m, 4.0);
  for (const auto& [name, matrix] : {std::pair{"down", &level.down}, std::pair{"up", &level.up}}) {
    save_coo(*matrix, dir / (std::string(name) + "_a.coo"));
    const SparseMatrix back = load_coo(dir / (std::string(name) + "_a.coo"));
    save_coo(back, dir / (std::string(name) + "_b.coo"));
    o.require(back == *matrix, std::string(name) + " matrix differs after load");
    o.require(testing::read_file(dir / (std::string(name) + "_a.coo")) ==
                  testing::read_file(dir / (std::string(name) + "_b.coo")),
              std::string(name) + " bytes");
  }

  Model model(build_correspondence_net(12, 6, 4), testing::icosahedron(), {}, 1);
  Rng rng(4);
  for (auto& p : model.parameters()) p.grad = random_matrix(p.value.rows(), p.value.cols(), rng);
  adam_step(model.parameters(), AdamOptions{});
  CheckpointInfo info;
  info.seed = 1;
  info.epoch = 1;
  info.extra["model"] = to_json(model.spec());
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  save_checkpoint(dir / "a" / "ck", model.parameters(), info);
  Model other(build_correspondence_net(12, 6, 4), testing::icosahedron(), {}, 2);
  const CheckpointInfo back = load_checkpoint(dir / "a" / "ck", other.parameters());
  save_checkpoint(dir / "b" / "ck", other.parameters(), back);
  for (const char* file : {"ck.json", "ck.bin"})
    o.require(testing::read_file(dir / "a" / file) == testing::read_file(dir / "b" / file),
              std::string("checkpoint ") + file);

  std::vector<Face> faces = m.faces();
  std::swap(faces[3], faces[4]);
  bool stale = false;
  try {
    load_spiral_table(dir / "a.spiral", TriangleMesh(m.positions(), faces));
  } catch (const StaleTableError&) {
    stale = true;
  }
  o.require(stale, "stale topology hash not detected");
  o.detail << "spiral table, down/up COO and checkpoint byte-identical; stale hash detected";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string only = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"parameter count", parameter_count_check},
      {"spiral determinism and structure", spiral_structure_check},
      {"dilation identity", dilation_check},
      {"gradient integrity", gradient_check},
      {"decimation contracts", decimation_check},
      {"correspondence overfit", correspondence_check},
      {"classifier sanity", classifier_check},
      {"autoencoder oracle", autoencoder_check},
      {"persistence round trips", persistence_check},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    if (name.find(only) == std::string::npos) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail.str() << " ["
              << fmt(seconds_since(start)) << " s]" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
