#include "spiralmesh/layers.hpp"

#include <cmath>
#include <string>

#include "spiralmesh/error.hpp"

namespace spiralmesh {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Lin: return "lin";
    case LayerKind::Conv: return "conv";
    case LayerKind::Pool: return "pool";
    case LayerKind::Unpool: return "unpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Unflatten: return "unflatten";
    case LayerKind::Fc: return "fc";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (LayerKind k : {LayerKind::Lin, LayerKind::Conv, LayerKind::Pool, LayerKind::Unpool,
                      LayerKind::Flatten, LayerKind::Unflatten, LayerKind::Fc})
    if (to_string(k) == name) return k;
  throw Error("unknown layer kind '" + name + "'");
}

namespace {

struct ShapeState {
  bool per_vertex = true;
  int level = 0;
  std::int64_t width = 0;  // channels, or flat width when !per_vertex
};

struct LayerShape {
  std::int64_t in = 0;
  std::int64_t weight_rows = 0;  // 0 for parameter-free layers
  std::int64_t out = 0;
};

std::string where(std::size_t i, const LayerSpec& l) {
  return "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
}

// Advances the shape through one layer, validating compatibility.
LayerShape step_shape(const ModelSpec& spec, std::size_t i, ShapeState& s) {
  const LayerSpec& l = spec.layers[i];
  auto vertices_at = [&](int level) -> std::int64_t {
    if (level < 0 || level >= static_cast<int>(spec.level_vertex_counts.size()))
      throw ShapeError(where(i, l) + ": no vertex count for mesh level " + std::to_string(level));
    return spec.level_vertex_counts[level];
  };
  LayerShape shape{s.width, 0, s.width};
  switch (l.kind) {
    case LayerKind::Lin:
    case LayerKind::Conv:
      if (!s.per_vertex) throw ShapeError(where(i, l) + ": needs per-vertex features");
      if (l.width < 1) throw ShapeError(where(i, l) + ": width must be positive");
      if (l.kind == LayerKind::Conv && (l.length < 1 || l.dilation < 1))
        throw ShapeError(where(i, l) + ": spiral length and dilation must be positive");
      shape.weight_rows = (l.kind == LayerKind::Conv ? l.length : 1) * s.width;
      shape.out = s.width = l.width;
      break;
    case LayerKind::Pool:
      if (!s.per_vertex || l.level != s.level)
        throw ShapeError(where(i, l) + ": pools level " + std::to_string(l.level) +
                         " but features are on level " + std::to_string(s.level));
      vertices_at(l.level + 1);
      ++s.level;
      break;
    case LayerKind::Unpool:
      if (!s.per_vertex || l.level + 1 != s.level)
        throw ShapeError(where(i, l) + ": unpools level " + std::to_string(l.level) +
                         " but features are on level " + std::to_string(s.level));
      --s.level;
      break;
    case LayerKind::Flatten:
      if (!s.per_vertex) throw ShapeError(where(i, l) + ": already flat");
      shape.out = s.width = vertices_at(s.level) * s.width;
      s.per_vertex = false;
      break;
    case LayerKind::Unflatten:
      if (s.per_vertex || l.width < 1 || vertices_at(s.level) * l.width != s.width)
        throw ShapeError(where(i, l) + ": cannot unflatten width " + std::to_string(s.width) +
                         " into " + std::to_string(l.width) + " channels");
      shape.out = s.width = l.width;
      s.per_vertex = true;
      break;
    case LayerKind::Fc:
      if (s.per_vertex) throw ShapeError(where(i, l) + ": needs flattened features");
      if (l.width < 1) throw ShapeError(where(i, l) + ": width must be positive");
      shape.weight_rows = s.width;
      shape.out = s.width = l.width;
      break;
  }
  return shape;
}

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

std::vector<Index> chain_counts(std::span<const DecimationLevel> levels) {
  std::vector<Index> counts{levels.front().fine_count()};
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].fine_count() != counts.back())
      throw ShapeError("decimation level " + std::to_string(i) + " starts from " +
                       std::to_string(levels[i].fine_count()) + " vertices, previous level has " +
                       std::to_string(counts.back()));
    counts.push_back(levels[i].coarse_count());
  }
  return counts;
}

}  // namespace

std::size_t parameter_count(const ModelSpec& spec) {
  ShapeState s;
  s.width = spec.input_width;
  std::size_t total = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerShape shape = step_shape(spec, i, s);
    if (shape.weight_rows > 0)
      total += static_cast<std::size_t>(shape.weight_rows * shape.out + shape.out);
  }
  return total;
}

ModelSpec build_correspondence_net(int n_out, int length, int width_divisor, int dilation) {
  if (length < 1) throw Error("spiral length must be >= 1");
  if (n_out < 1 || width_divisor < 1) throw Error("invalid correspondence net parameters");
  auto w = [&](int width) { return std::max(1, width / width_divisor); };
  ModelSpec spec;
  spec.name = "correspondence";
  spec.input_width = 3;
  spec.layers = {
      {LayerKind::Lin, w(16), 1, 1, -1, true, false},
      {LayerKind::Conv, w(32), length, dilation, -1, true, false},
      {LayerKind::Conv, w(64), length, dilation, -1, true, false},
      {LayerKind::Conv, w(128), length, dilation, -1, true, false},
      {LayerKind::Lin, w(256), 1, 1, -1, false, false},
      {LayerKind::Lin, n_out, 1, 1, -1, false, true},
  };
  return spec;
}

ModelSpec build_classifier_net(std::span<const DecimationLevel> levels, int n_classes, int length,
                               int dilation) {
  if (levels.size() != 2) throw ShapeError("classifier needs exactly 2 decimation levels");
  if (n_classes < 1) throw Error("classifier needs at least one class");
  ModelSpec spec;
  spec.name = "classifier";
  spec.level_vertex_counts = chain_counts(levels);
  spec.layers = {
      {LayerKind::Conv, 16, length, dilation, -1, true, false},
      {LayerKind::Pool, 0, 1, 1, 0, false, false},
      {LayerKind::Conv, 16, length, dilation, -1, true, false},
      {LayerKind::Pool, 0, 1, 1, 1, false, false},
      {LayerKind::Flatten},
      {LayerKind::Fc, 32, 1, 1, -1, true, true},
      {LayerKind::Fc, n_classes, 1, 1, -1, false, true},
  };
  return spec;
}

ModelSpec build_autoencoder(std::span<const DecimationLevel> levels, int latent, int length,
                            int dilation) {
  if (levels.size() != 4) throw ShapeError("autoencoder needs exactly 4 decimation levels");
  if (latent < 1) throw Error("latent size must be positive");
  ModelSpec spec;
  spec.name = "autoencoder";
  spec.level_vertex_counts = chain_counts(levels);
  const int widths[4] = {32, 32, 32, 64};
  for (int k = 0; k < 4; ++k) {
    spec.layers.push_back({LayerKind::Conv, widths[k], length, dilation, -1, true, false});
    spec.layers.push_back({LayerKind::Pool, 0, 1, 1, k, false, false});
  }
  spec.layers.push_back({LayerKind::Flatten});
  spec.layers.push_back({LayerKind::Fc, latent});
  spec.layers.push_back({LayerKind::Fc, spec.level_vertex_counts[4] * widths[3]});
  spec.layers.push_back({LayerKind::Unflatten, widths[3]});
  const int decoder_widths[4] = {64, 32, 32, 32};
  for (int k = 0; k < 4; ++k) {
    spec.layers.push_back({LayerKind::Unpool, 0, 1, 1, 3 - k, false, false});
    spec.layers.push_back({LayerKind::Conv, decoder_widths[k], length, dilation, -1, true, false});
  }
  spec.layers.push_back({LayerKind::Conv, 3, length, dilation, -1, false, false});
  return spec;
}

nlohmann::json to_json(const ModelSpec& spec, std::span<const std::string> level_files) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["input_width"] = spec.input_width;
  j["dropout"] = spec.dropout_p;
  j["level_vertex_counts"] = spec.level_vertex_counts;
  if (!level_files.empty()) j["levels"] = std::vector<std::string>(level_files.begin(), level_files.end());
  j["layers"] = nlohmann::json::array();
  for (const LayerSpec& l : spec.layers) {
    nlohmann::json e{{"kind", to_string(l.kind)}};
    if (l.kind == LayerKind::Lin || l.kind == LayerKind::Conv || l.kind == LayerKind::Fc ||
        l.kind == LayerKind::Unflatten)
      e["width"] = l.width;
    if (l.kind == LayerKind::Conv) {
      e["length"] = l.length;
      e["dilation"] = l.dilation;
    }
    if (l.kind == LayerKind::Pool || l.kind == LayerKind::Unpool) e["level"] = l.level;
    e["elu"] = l.elu;
    e["dropout"] = l.dropout;
    j["layers"].push_back(e);
  }
  return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    spec.input_width = j.at("input_width").get<int>();
    spec.dropout_p = j.at("dropout").get<double>();
    spec.level_vertex_counts = j.at("level_vertex_counts").get<std::vector<Index>>();
    for (const auto& e : j.at("layers")) {
      LayerSpec l;
      l.kind = layer_kind_from_string(e.at("kind").get<std::string>());
      l.width = e.value("width", 0);
      l.length = e.value("length", 1);
      l.dilation = e.value("dilation", 1);
      l.level = e.value("level", -1);
      l.elu = e.value("elu", false);
      l.dropout = e.value("dropout", false);
      spec.layers.push_back(l);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ShapeError(std::string("model spec: ") + ex.what());
  }
  return spec;
}

Var spiral_conv_forward(Graph& graph, const SpiralConvLayer& layer, Var x, Eigen::Index batch,
                        Activation activation) {
  const SpiralTable& table = *layer.table;
  if (x.rows() != static_cast<Eigen::Index>(table.vertex_count()) * batch)
    throw ShapeError("spiral conv: " + std::to_string(x.rows()) + " feature rows for a table of " +
                     std::to_string(table.vertex_count()) + " vertices x batch " + std::to_string(batch));
  if (layer.weight->value.rows() != table.length * x.cols())
    throw ShapeError("spiral conv: weight has " + std::to_string(layer.weight->value.rows()) +
                     " rows, expected length " + std::to_string(table.length) + " x " +
                     std::to_string(x.cols()) + " input channels");
  return gather_affine(x, table.indices, graph.parameter(*layer.weight), graph.parameter(*layer.bias),
                       batch, activation);
}

Model::Model(ModelSpec spec, const TriangleMesh& mesh, std::vector<DecimationLevel> levels,
             std::uint64_t init_seed, int threads)
    : spec_(std::move(spec)), levels_(std::move(levels)), input_vertices_(mesh.vertex_count()) {
  if (spec_.level_vertex_counts.empty()) {
    spec_.level_vertex_counts.push_back(mesh.vertex_count());
    for (const auto& l : levels_) spec_.level_vertex_counts.push_back(l.coarse_count());
  }
  if (spec_.level_vertex_counts.front() != mesh.vertex_count())
    throw ShapeError("model expects " + std::to_string(spec_.level_vertex_counts.front()) +
                     " input vertices, mesh has " + std::to_string(mesh.vertex_count()));
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    const Index fine = k == 0 ? mesh.vertex_count() : levels_[k - 1].coarse_count();
    if (levels_[k].fine_count() != fine ||
        (k + 1 < spec_.level_vertex_counts.size() &&
         levels_[k].coarse_count() != spec_.level_vertex_counts[k + 1]))
      throw ShapeError("decimation level " + std::to_string(k) + " does not match the model spec");
  }

  Rng rng(init_seed);
  ShapeState s;
  s.width = spec_.input_width;
  params_.reserve(2 * spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    Step step;
    step.layer = l;
    step.vertices = s.level < static_cast<int>(spec_.level_vertex_counts.size())
                        ? spec_.level_vertex_counts[s.level]
                        : 0;
    const int level_here = s.level;
    const LayerShape shape = step_shape(spec_, i, s);
    if ((l.kind == LayerKind::Pool || l.kind == LayerKind::Unpool) &&
        l.level >= static_cast<int>(levels_.size()))
      throw ShapeError(where(i, l) + ": model has only " + std::to_string(levels_.size()) + " levels");
    if (shape.weight_rows > 0) {
      const std::string prefix = std::to_string(i) + "." + to_string(l.kind);
      step.weight = static_cast<int>(params_.size());
      params_.emplace_back(prefix + ".weight", xavier_uniform(shape.weight_rows, shape.out, rng));
      step.bias = static_cast<int>(params_.size());
      params_.emplace_back(prefix + ".bias", Matrix::Zero(1, shape.out));
    }
    if (l.kind == LayerKind::Conv) {
      const auto key = std::make_tuple(level_here, l.length, l.dilation);
      auto it = tables_.find(key);
      if (it == tables_.end()) {
        const TriangleMesh& m = level_here == 0 ? mesh : levels_[level_here - 1].coarse;
        it = tables_.emplace(key, build_spiral_table(m, l.length, l.dilation, threads)).first;
      }
      step.table = &it->second;
    }
    steps_.push_back(step);
  }
}

const SpiralTable& Model::spiral_table(int level, int length, int dilation) const {
  const auto it = tables_.find(std::make_tuple(level, length, dilation));
  if (it == tables_.end()) throw Error("no spiral table for that level/length/dilation");
  return it->second;
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  for (const Parameter& p : params_) total += static_cast<std::size_t>(p.size());
  return total;
}

Var Model::forward(Graph& graph, const Matrix& input, Eigen::Index batch, bool training, Rng& rng) {
  if (input.rows() != static_cast<Eigen::Index>(input_vertices_) * batch ||
      input.cols() != spec_.input_width)
    throw ShapeError("model input is " + std::to_string(input.rows()) + "x" +
                     std::to_string(input.cols()) + ", expected " +
                     std::to_string(static_cast<Eigen::Index>(input_vertices_) * batch) + "x" +
                     std::to_string(spec_.input_width));
  Var x = graph.constant(input);
  for (const Step& step : steps_) {
    const LayerSpec& l = step.layer;
    if (l.dropout) x = dropout(x, spec_.dropout_p, training, rng);
    switch (l.kind) {
      case LayerKind::Lin:
      case LayerKind::Fc:
        x = add_bias(matmul(x, graph.parameter(params_[step.weight])),
                     graph.parameter(params_[step.bias]));
        break;
      case LayerKind::Conv:
        x = spiral_conv_forward(graph, {&params_[step.weight], &params_[step.bias], step.table}, x,
                                batch, l.elu ? Activation::Elu : Activation::Identity);
        break;
      case LayerKind::Pool:
        x = sparse_apply(levels_[l.level].down, x);
        break;
      case LayerKind::Unpool:
        x = sparse_apply(levels_[l.level].up, x);
        break;
      case LayerKind::Flatten:
        x = reshape(x, batch, x.rows() / batch * x.cols());
        break;
      case LayerKind::Unflatten:
        x = reshape(x, x.rows() * x.cols() / l.width, l.width);
        break;
    }
    if (l.elu && l.kind != LayerKind::Conv) x = elu(x);
  }
  return x;
}

}  // namespace spiralmesh
