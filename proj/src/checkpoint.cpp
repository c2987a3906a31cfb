#include "spiralmesh/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "spiralmesh/error.hpp"

namespace spiralmesh {

namespace {

void put_le(std::vector<unsigned char>& out, const Matrix& m) {
  const std::size_t start = out.size();
  out.resize(start + sizeof(double) * static_cast<std::size_t>(m.size()));
  std::memcpy(out.data() + start, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = start; i < out.size(); i += 8)
      for (int k = 0; k < 4; ++k) std::swap(out[i + k], out[i + 7 - k]);
  }
}

void get_le(const std::vector<unsigned char>& in, std::size_t& offset, Matrix& m) {
  const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(m.size());
  std::vector<unsigned char> chunk(in.begin() + static_cast<std::ptrdiff_t>(offset),
                                   in.begin() + static_cast<std::ptrdiff_t>(offset + bytes));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < chunk.size(); i += 8)
      for (int k = 0; k < 4; ++k) std::swap(chunk[i + k], chunk[i + 7 - k]);
  }
  std::memcpy(m.data(), chunk.data(), bytes);
  offset += bytes;
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return stem.parent_path() / (stem.filename().string() + suffix);
}

}  // namespace

std::filesystem::path checkpoint_stem(const std::filesystem::path& path) {
  if (path.extension() == ".json" || path.extension() == ".bin")
    return path.parent_path() / path.stem();
  return path;
}

void save_checkpoint(const std::filesystem::path& stem, std::span<const Parameter> params,
                     const CheckpointInfo& info) {
  std::vector<unsigned char> blob;
  for (const Parameter& p : params) put_le(blob, p.value);
  for (const Parameter& p : params) put_le(blob, p.adam_m);
  for (const Parameter& p : params) put_le(blob, p.adam_v);

  nlohmann::json manifest;
  manifest["format"] = "spiralmesh-checkpoint";
  manifest["seed"] = info.seed;
  manifest["epoch"] = info.epoch;
  manifest["lr"] = info.lr;
  manifest["blob"] = with_suffix(stem, ".bin").filename().string();
  manifest["blob_bytes"] = blob.size();
  manifest["parameters"] = nlohmann::json::array();
  for (const Parameter& p : params)
    manifest["parameters"].push_back(
        {{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"step_count", p.step_count}});
  manifest["extra"] = info.extra;

  std::ofstream bin(with_suffix(stem, ".bin"), std::ios::binary);
  if (!bin) throw CheckpointError(with_suffix(stem, ".bin").string() + ": cannot write");
  bin.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  std::ofstream json(with_suffix(stem, ".json"), std::ios::binary);
  if (!json) throw CheckpointError(with_suffix(stem, ".json").string() + ": cannot write");
  json << manifest.dump(2) << '\n';
}

CheckpointInfo load_checkpoint(const std::filesystem::path& stem_in, std::span<Parameter> params) {
  const auto stem = checkpoint_stem(stem_in);
  const auto json_path = with_suffix(stem, ".json");
  std::ifstream json(json_path);
  if (!json) throw CheckpointError(json_path.string() + ": cannot open checkpoint manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(json_path.string() + ": " + e.what());
  }

  CheckpointInfo info;
  std::size_t expected = 0;
  try {
    const auto& entries = manifest.at("parameters");
    if (entries.size() != params.size())
      throw ShapeError(json_path.string() + ": checkpoint has " + std::to_string(entries.size()) +
                       " parameters, model has " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& e = entries[i];
      const auto name = e.at("name").get<std::string>();
      const auto rows = e.at("shape").at(0).get<Eigen::Index>();
      const auto cols = e.at("shape").at(1).get<Eigen::Index>();
      if (name != params[i].name || rows != params[i].value.rows() || cols != params[i].value.cols())
        throw ShapeError(json_path.string() + ": parameter " + std::to_string(i) + " is " + name +
                         " " + std::to_string(rows) + "x" + std::to_string(cols) + ", model expects " +
                         params[i].name + " " + std::to_string(params[i].value.rows()) + "x" +
                         std::to_string(params[i].value.cols()));
      expected += 3 * sizeof(double) * static_cast<std::size_t>(rows * cols);
    }
    info.seed = manifest.at("seed").get<std::uint64_t>();
    info.epoch = manifest.at("epoch").get<int>();
    info.lr = manifest.at("lr").get<double>();
    if (manifest.contains("extra")) info.extra = manifest["extra"];
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(json_path.string() + ": " + e.what());
  }

  const auto bin_path = with_suffix(stem, ".bin");
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw CheckpointError(bin_path.string() + ": cannot open checkpoint blob");
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (blob.size() != expected)
    throw CheckpointError(bin_path.string() + ": blob has " + std::to_string(blob.size()) +
                          " bytes, expected " + std::to_string(expected));

  std::size_t offset = 0;
  for (Parameter& p : params) get_le(blob, offset, p.value);
  for (Parameter& p : params) get_le(blob, offset, p.adam_m);
  for (Parameter& p : params) get_le(blob, offset, p.adam_v);
  const auto& entries = manifest["parameters"];
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].step_count = entries[i].value("step_count", std::int64_t{0});
    params[i].grad = Matrix::Zero(params[i].value.rows(), params[i].value.cols());
  }
  return info;
}

}  // namespace spiralmesh
