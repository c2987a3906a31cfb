#include "spiralmesh/config.hpp"

#include <fstream>
#include <set>

#include "spiralmesh/error.hpp"

namespace spiralmesh {

std::string to_string(Task task) {
  switch (task) {
    case Task::Correspondence: return "correspondence";
    case Task::Classify: return "classify";
    case Task::Autoencode: return "autoencode";
  }
  return "?";
}

Task task_from_string(const std::string& name) {
  for (Task t : {Task::Correspondence, Task::Classify, Task::Autoencode})
    if (to_string(t) == name) return t;
  throw ConfigError("task", "must be one of correspondence, classify, autoencode (got '" + name + "')");
}

namespace {

using nlohmann::json;

class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "must be an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [key, value] : j_.items())
      if (!known.count(key)) throw ConfigError(at(key), "unknown key");
  }

  bool has(const char* key) const { return j_.contains(key); }

  std::string at(const std::string& key) const { return path_ + "/" + key; }

  template <typename T>
  void read(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(at(key), "must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(at(key), "must be an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
        throw ConfigError(at(key), "must be non-negative");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(at(key), "must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(at(key), "must be a string");
    }
    out = v.get<T>();
  }

  const json& sub(const char* key) const { return j_.at(key); }

 private:
  const json& j_;
  std::string path_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() || base.empty() ? path : base / path).lexically_normal();
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

}  // namespace

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  Fields top(j, "");
  top.allow({"task", "mesh", "hierarchy", "synthetic", "pool_factors", "width_divisor", "latent",
             "spiral_length", "dilation", "diameter", "train", "output_dir"});
  RunConfig c;
  if (!top.has("task")) throw ConfigError("/task", "is required");
  std::string task;
  top.read("task", task);
  try {
    c.task = task_from_string(task);
  } catch (const ConfigError&) {
    throw ConfigError("/task", "must be one of correspondence, classify, autoencode");
  }
  switch (c.task) {
    case Task::Correspondence:
      c.train = correspondence_defaults();
      break;
    case Task::Classify:
      c.train = classifier_defaults();
      c.pool_factors = {4.0, 4.0};
      c.synthetic.subdivisions = 3;
      c.synthetic.samples = 40;
      c.synthetic.test_samples = 8;
      c.synthetic.amplitude = 0.2;
      break;
    case Task::Autoencode:
      c.train = autoencoder_defaults();
      c.pool_factors = {4.0, 4.0, 4.0, 4.0};
      c.synthetic.subdivisions = 4;
      c.synthetic.samples = 200;
      c.synthetic.test_samples = 20;
      c.synthetic.amplitude = 0.2;
      break;
  }

  std::string path;
  if (top.has("mesh")) {
    top.read("mesh", path);
    c.mesh = resolve(base_dir, path);
  }
  if (top.has("hierarchy")) {
    top.read("hierarchy", path);
    c.hierarchy = resolve(base_dir, path);
  }
  if (top.has("synthetic")) {
    Fields s(top.sub("synthetic"), "/synthetic");
    s.allow({"subdivisions", "samples", "test_samples", "amplitude", "classes", "seed"});
    s.read("subdivisions", c.synthetic.subdivisions);
    s.read("samples", c.synthetic.samples);
    s.read("test_samples", c.synthetic.test_samples);
    s.read("amplitude", c.synthetic.amplitude);
    s.read("classes", c.synthetic.classes);
    s.read("seed", c.synthetic.seed);
  }
  require(c.synthetic.subdivisions >= 0 && c.synthetic.subdivisions <= 6, "/synthetic/subdivisions",
          "must be in [0, 6]");
  require(c.synthetic.samples >= 1, "/synthetic/samples", "must be at least 1");
  require(c.synthetic.test_samples >= 0 && c.synthetic.test_samples < c.synthetic.samples,
          "/synthetic/test_samples", "must be in [0, samples)");
  require(c.synthetic.amplitude >= 0.0 && c.synthetic.amplitude <= 0.3, "/synthetic/amplitude",
          "must be in [0, 0.3]");
  require(c.synthetic.classes >= 1, "/synthetic/classes", "must be at least 1");

  if (top.has("pool_factors")) {
    const json& f = top.sub("pool_factors");
    require(f.is_array(), "/pool_factors", "must be an array of numbers");
    c.pool_factors.clear();
    for (std::size_t i = 0; i < f.size(); ++i) {
      const std::string field = "/pool_factors/" + std::to_string(i);
      require(f[i].is_number(), field, "must be a number");
      require(f[i].get<double>() > 1.0, field, "must exceed 1");
      c.pool_factors.push_back(f[i].get<double>());
    }
  }
  const std::size_t needed = c.task == Task::Classify ? 2 : c.task == Task::Autoencode ? 4 : 0;
  if (!c.hierarchy)
    require(c.pool_factors.size() == needed, "/pool_factors",
            "needs exactly " + std::to_string(needed) + " factors for task " + to_string(c.task));

  top.read("width_divisor", c.width_divisor);
  require(c.width_divisor >= 1, "/width_divisor", "must be at least 1");
  top.read("latent", c.latent);
  require(c.latent >= 1, "/latent", "must be at least 1");
  top.read("spiral_length", c.train.spiral_length);
  top.read("dilation", c.train.dilation);
  if (top.has("diameter")) {
    std::string d;
    top.read("diameter", d);
    require(d == "geodesic" || d == "bbox", "/diameter", "must be geodesic or bbox");
    c.diameter = diameter_estimate_from_string(d);
  }
  if (top.has("train")) {
    Fields t(top.sub("train"), "/train");
    t.allow({"lr", "lr_decay", "weight_decay", "dropout", "batch_size", "epochs", "seed"});
    t.read("lr", c.train.lr);
    t.read("lr_decay", c.train.lr_decay);
    t.read("weight_decay", c.train.weight_decay);
    t.read("dropout", c.train.dropout);
    t.read("batch_size", c.train.batch_size);
    t.read("epochs", c.train.epochs);
    t.read("seed", c.train.seed);
  }
  try {
    c.train.validate();
  } catch (const ConfigError& e) {
    const std::string& f = e.field();
    const std::string field = f.rfind("train.", 0) == 0 ? "/train/" + f.substr(6) : "/" + f;
    throw ConfigError(field, std::string(e.what()).substr(f.size() + 2));
  }
  if (top.has("output_dir")) {
    top.read("output_dir", path);
    require(!path.empty(), "/output_dir", "must not be empty");
    c.output_dir = resolve(base_dir, path);
  } else {
    c.output_dir = resolve(base_dir, "run");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return parse_run_config(j, path.parent_path());
}

json to_json(const RunConfig& c) {
  json j;
  j["task"] = to_string(c.task);
  if (c.mesh) j["mesh"] = c.mesh->generic_string();
  if (c.hierarchy) j["hierarchy"] = c.hierarchy->generic_string();
  j["synthetic"] = {{"subdivisions", c.synthetic.subdivisions},
                    {"samples", c.synthetic.samples},
                    {"test_samples", c.synthetic.test_samples},
                    {"amplitude", c.synthetic.amplitude},
                    {"classes", c.synthetic.classes},
                    {"seed", c.synthetic.seed}};
  j["pool_factors"] = c.pool_factors;
  j["width_divisor"] = c.width_divisor;
  j["latent"] = c.latent;
  j["spiral_length"] = c.train.spiral_length;
  j["dilation"] = c.train.dilation;
  j["diameter"] = to_string(c.diameter);
  j["train"] = {{"lr", c.train.lr},
                {"lr_decay", c.train.lr_decay},
                {"weight_decay", c.train.weight_decay},
                {"dropout", c.train.dropout},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"seed", c.train.seed}};
  j["output_dir"] = c.output_dir.generic_string();
  return j;
}

}  // namespace spiralmesh
