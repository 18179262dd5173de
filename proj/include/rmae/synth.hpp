#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rmae/image.hpp"
#include "rmae/regions.hpp"

namespace rmae {

// Random rectangles and ellipses over a textured background. Later shapes
// occlude earlier ones.
struct SynthSpec {
  int image_size = 32;
  int min_shapes = 1;
  int max_shapes = 4;
  double noise = 0.02;    // Gaussian pixel noise std
  double texture = 0.08;  // background sinusoid amplitude
  int count = 64;
  std::uint64_t seed = 0;
};

struct SynthSample {
  Image image;
  LabelMap labels;  // 0 is background, then one id per still-visible shape
  int num_shapes = 0;
};

// Sample `index` depends only on (spec, index).
SynthSample synth_sample(const SynthSpec& spec, int index);
std::vector<SynthSample> synth_dataset(const SynthSpec& spec);

// One map per label (background included): the exact partition of the image.
RegionSet ground_truth_regions(const SynthSample& s);

// Mean foreground fraction of the ground-truth region maps.
double foreground_prior(const std::vector<SynthSample>& data);

std::string sample_id(int index);

// <dir>/images/<id>.ppm, <dir>/regions/<id>.{pgm,json}, <dir>/synth.json.
void write_dataset(const std::filesystem::path& dir, const SynthSpec& spec);
std::vector<std::string> list_image_ids(const std::filesystem::path& dir);
std::filesystem::path image_path(const std::filesystem::path& dir, const std::string& id);
std::filesystem::path region_path(const std::filesystem::path& dir, const std::string& id);

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

}  // namespace rmae
