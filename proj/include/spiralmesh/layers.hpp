#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "spiralmesh/autodiff.hpp"
#include "spiralmesh/decimate.hpp"
#include "spiralmesh/spiral.hpp"

namespace spiralmesh {

enum class LayerKind {
  Lin,        // per-vertex affine map (a 1x1 convolution)
  Conv,       // spiral convolution
  Pool,       // levels[level].down
  Unpool,     // levels[level].up
  Flatten,    // (batch*n) x C -> batch x (n*C), vertex-major
  Unflatten,  // inverse of Flatten with C = width
  Fc,         // affine map on flattened features
};

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::Lin;
  int width = 0;
  int length = 1;
  int dilation = 1;
  int level = -1;
  bool elu = false;      // ELU after the layer
  bool dropout = false;  // dropout before the layer

  bool operator==(const LayerSpec&) const = default;
};

/// Declarative architecture. level_vertex_counts[k] is the vertex count of
/// mesh level k (0 = input); it may be empty for networks without pooling.
struct ModelSpec {
  std::string name;
  int input_width = 3;
  double dropout_p = 0.5;
  std::vector<Index> level_vertex_counts;
  std::vector<LayerSpec> layers;

  bool operator==(const ModelSpec&) const = default;
};

/// Checks width/level compatibility and returns the trainable parameter count.
std::size_t parameter_count(const ModelSpec& spec);

/// Lin(16) -> Conv(32) -> Conv(64) -> Conv(128) -> Lin(256) -> Lin(n_out), ELU
/// after the first Lin and every Conv, dropout before the last Lin. Hidden
/// widths are divided by width_divisor.
ModelSpec build_correspondence_net(int n_out, int length, int width_divisor = 1, int dilation = 1);

/// Conv(16) -> Pool -> Conv(16) -> Pool -> FC(32) -> FC(n_classes);
/// dropout before each FC, ELU after each Conv and the hidden FC.
ModelSpec build_classifier_net(std::span<const DecimationLevel> levels, int n_classes,
                               int length = 9, int dilation = 1);

/// Encoder 3 x {Conv(32) -> Pool} -> Conv(64) -> Pool -> FC(latent); decoder
/// FC -> {Unpool -> Conv(64)} -> 3 x {Unpool -> Conv(32)} -> Conv(3).
/// ELU after every Conv except the last.
ModelSpec build_autoencoder(std::span<const DecimationLevel> levels, int latent, int length,
                            int dilation);

nlohmann::json to_json(const ModelSpec& spec, std::span<const std::string> level_files = {});
ModelSpec model_spec_from_json(const nlohmann::json& j);

/// Views into a Model's parameters and spiral table.
struct SpiralConvLayer {
  Parameter* weight = nullptr;  // (length * F_in) x F_out
  Parameter* bias = nullptr;    // 1 x F_out
  const SpiralTable* table = nullptr;
};

/// gather_rows(x, table) * weight + bias over a batch of stacked meshes.
Var spiral_conv_forward(Graph& graph, const SpiralConvLayer& layer, Var x, Eigen::Index batch = 1,
                        Activation activation = Activation::Identity);

/// Instantiated network: parameters, spiral tables per mesh level, and the
/// pooling matrices it references.
class Model {
 public:
  /// Weights are Xavier-uniform from `init_seed`, biases zero. Spiral tables
  /// are built on each level's mesh with the Conv's own length and dilation.
  Model(ModelSpec spec, const TriangleMesh& mesh, std::vector<DecimationLevel> levels,
        std::uint64_t init_seed, int threads = 1);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;

  /// input is (batch * n) x input_width. Returns (batch * n_out) x C for
  /// per-vertex outputs or batch x C for flattened heads.
  Var forward(Graph& graph, const Matrix& input, Eigen::Index batch, bool training, Rng& rng);

  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  std::size_t parameter_count() const;
  const ModelSpec& spec() const { return spec_; }
  const std::vector<DecimationLevel>& levels() const { return levels_; }
  Index input_vertices() const { return input_vertices_; }
  const SpiralTable& spiral_table(int level, int length, int dilation) const;

 private:
  struct Step {
    LayerSpec layer;
    int weight = -1;
    int bias = -1;
    const SpiralTable* table = nullptr;
    Index vertices = 0;  // vertex count at this step's input
  };

  ModelSpec spec_;
  std::vector<DecimationLevel> levels_;
  Index input_vertices_ = 0;
  std::vector<Parameter> params_;
  std::map<std::tuple<int, int, int>, SpiralTable> tables_;
  std::vector<Step> steps_;
};

}  // namespace spiralmesh
