#pragma once

#include <filesystem>
#include <memory>

#include "json.hpp"
#include "rmae/model.hpp"

namespace rmae {

// Layout: <dir>/manifest.json {config, step, rng_state, metrics} and
// <dir>/params/<name>.bin, one tensor blob per parameter.
void save_params(const std::filesystem::path& dir, const ParamSet& params);
// Every parameter of `params` must be present with a matching shape.
void load_params(const std::filesystem::path& dir, ParamSet& params);

void write_manifest(const std::filesystem::path& dir, const nlohmann::json& manifest);
nlohmann::json read_manifest(const std::filesystem::path& dir);

ModelConfig checkpoint_model_config(const std::filesystem::path& dir);

// Builds a model from the manifest config and loads its weights.
std::unique_ptr<RMaeModel> load_model(const std::filesystem::path& dir);

}  // namespace rmae
