#include "rmae/checkpoint.hpp"

#include <fstream>

#include "rmae/tensor_io.hpp"

namespace rmae {

namespace fs = std::filesystem;

void save_params(const fs::path& dir, const ParamSet& params) {
  fs::create_directories(dir / "params");
  for (const Tensor& t : params.tensors()) save_tensor(dir / "params" / (t.name() + ".bin"), t);
}

void load_params(const fs::path& dir, ParamSet& params) {
  for (Tensor& t : params.tensors()) {
    const fs::path p = dir / "params" / (t.name() + ".bin");
    if (!fs::exists(p)) throw std::runtime_error("checkpoint is missing parameter " + t.name());
    Tensor stored = load_tensor(p);
    if (stored.shape() != t.shape()) {
      throw ShapeError("checkpoint parameter " + t.name() + " has shape " +
                       shape_str(stored.shape()) + ", model expects " + shape_str(t.shape()));
    }
    std::copy(stored.data().begin(), stored.data().end(), t.data().begin());
  }
}

void write_manifest(const fs::path& dir, const nlohmann::json& manifest) {
  fs::create_directories(dir);
  std::ofstream os(dir / "manifest.json");
  if (!os) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  os << manifest.dump(2) << '\n';
}

nlohmann::json read_manifest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("no checkpoint manifest in " + dir.string());
  return nlohmann::json::parse(is);
}

ModelConfig checkpoint_model_config(const fs::path& dir) {
  const auto m = read_manifest(dir);
  ModelConfig cfg;
  from_json(m.at("config").at("model"), cfg);
  return cfg;
}

std::unique_ptr<RMaeModel> load_model(const fs::path& dir) {
  auto model = std::make_unique<RMaeModel>(checkpoint_model_config(dir), 0);
  load_params(dir, model->params());
  return model;
}

}  // namespace rmae
