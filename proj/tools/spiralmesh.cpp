// spiralmesh command-line entry point.
//
//   spiralmesh spirals  --mesh M --length L [--dilation D] --out FILE
//   spiralmesh decimate --mesh M --factors 4,4 --out DIR
//   spiralmesh train    --config FILE
//   spiralmesh eval     --checkpoint STEM --config FILE [--split test]
//
// Exit codes: 0 success, 2 input or validation error, 3 non-finite loss.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spiralmesh/decimate.hpp"
#include "spiralmesh/error.hpp"
#include "spiralmesh/mesh.hpp"
#include "spiralmesh/run.hpp"
#include "spiralmesh/spiral.hpp"
#include "spiralmesh/text.hpp"

namespace fs = std::filesystem;
using namespace spiralmesh;

namespace {

constexpr int kInputError = 2;
constexpr int kNumericError = 3;

struct UsageError : Error {
  using Error::Error;
};

int resolve_threads(int flag) {
  const char* env = std::getenv("SPIRALMESH_THREADS");
  if (!env) return flag;
  const int threads = text::parse_number<int>(env).value_or(0);
  if (threads < 1) throw UsageError(std::string("SPIRALMESH_THREADS must be a positive integer, got '") + env + "'");
  return threads;
}

TriangleMesh load_manifold_mesh(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("no such mesh file: " + path.string());
  TriangleMesh mesh = load_mesh(path);
  const ValidationReport report = validate(mesh);
  if (!report.is_edge_manifold || !report.non_manifold_vertices.empty()) {
    std::string msg = path.string() + " is not manifold:";
    for (std::size_t i = 0; i < report.non_manifold_edges.size() && i < 10; ++i)
      msg += "\n  edge " + std::to_string(report.non_manifold_edges[i].first) + "-" +
             std::to_string(report.non_manifold_edges[i].second) + " has more than two faces";
    for (std::size_t i = 0; i < report.non_manifold_vertices.size() && i < 10; ++i)
      msg += "\n  vertex " + std::to_string(report.non_manifold_vertices[i]) + " has a non-disk neighborhood";
    throw UsageError(msg);
  }
  return mesh;
}

std::vector<double> parse_factors(const std::string& list) {
  std::vector<double> factors;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const std::string item = list.substr(start, comma - start);
    const std::optional<double> f = text::parse_number<double>(item);
    if (!f) throw UsageError("--factors: '" + item + "' is not a number");
    if (!(*f > 1.0)) throw UsageError("--factors: every factor must exceed 1, got " + item);
    factors.push_back(*f);
    start = comma + 1;
  }
  return factors;
}

int cmd_spirals(const fs::path& mesh_path, int length, int dilation, const fs::path& out, int threads) {
  const TriangleMesh mesh = load_manifold_mesh(mesh_path);
  const SpiralTable table = build_spiral_table(mesh, length, dilation, threads);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_spiral_table(table, out);
  std::cout << "vertices " << table.vertex_count() << " length " << table.length << " dilation "
            << table.dilation << " topology_hash " << text::format_hex(table.topology_hash) << '\n';
  return 0;
}

int cmd_decimate(const fs::path& mesh_path, const std::string& factor_list, const fs::path& out,
                 int threads) {
  const std::vector<double> factors = parse_factors(factor_list);
  const TriangleMesh mesh = load_manifold_mesh(mesh_path);
  const std::vector<DecimationLevel> levels = build_hierarchy(mesh, factors, threads);
  save_hierarchy(levels, out);
  std::cout << "level 0: " << mesh.vertex_count() << " vertices\n";
  for (std::size_t i = 0; i < levels.size(); ++i)
    std::cout << "level " << i + 1 << ": " << levels[i].coarse_count() << " vertices (factor "
              << text::format_double(levels[i].factor) << ")\n";
  std::cout << "manifest " << (out / "manifest.json").string() << '\n';
  return 0;
}

int cmd_train(const fs::path& config_path, int threads) {
  if (!fs::exists(config_path)) throw UsageError("no such config file: " + config_path.string());
  const RunConfig config = load_run_config(config_path);
  train_run(config, std::cout, threads, config_path);
  std::cout << "wrote " << config.output_dir.string() << '\n';
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& config_path, const std::string& split,
             int threads) {
  if (!fs::exists(config_path)) throw UsageError("no such config file: " + config_path.string());
  const RunConfig config = load_run_config(config_path);
  eval_run(config, checkpoint, split, std::cout, threads);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiral convolution networks on triangle meshes"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker threads for per-vertex work")
      ->check(CLI::PositiveNumber);

  fs::path mesh, out, config, checkpoint;
  int length = 0, dilation = 1;
  std::string factors, split = "test";

  auto* spirals = app.add_subcommand("spirals", "precompute a spiral table");
  spirals->add_option("--mesh", mesh, "input mesh (.obj or .off)")->required();
  spirals->add_option("--length", length, "spiral length l")->required()->check(CLI::PositiveNumber);
  spirals->add_option("--dilation", dilation, "dilation d")->check(CLI::PositiveNumber);
  spirals->add_option("--out", out, "output table file")->required();

  auto* decimate = app.add_subcommand("decimate", "build a pooling hierarchy");
  decimate->add_option("--mesh", mesh, "input mesh (.obj or .off)")->required();
  decimate->add_option("--factors", factors, "comma-separated factors, each > 1")->required();
  decimate->add_option("--out", out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("--config", config, "run config JSON")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint stem or .json")->required();
  eval->add_option("--config", config, "run config JSON")->required();
  eval->add_option("--split", split, "train, test or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    threads = resolve_threads(threads);
    if (*spirals) return cmd_spirals(mesh, length, dilation, out, threads);
    if (*decimate) return cmd_decimate(mesh, factors, out, threads);
    if (*train) return cmd_train(config, threads);
    return cmd_eval(checkpoint, config, split, threads);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
}
