#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "rmae/masking.hpp"

namespace rmae {

enum class RaeVariant { channel, batch, length };
enum class CrossFeed { pix_to_reg, reg_to_pix, bidirectional, rae_only, mae_only };

std::string to_string(RaeVariant v);
std::string to_string(CrossFeed m);
RaeVariant rae_variant_from_string(const std::string& s);
CrossFeed cross_feed_from_string(const std::string& s);

bool has_pixel_branch(CrossFeed m);
bool has_region_branch(CrossFeed m);
bool pixels_feed_regions(CrossFeed m);
bool regions_feed_pixels(CrossFeed m);

struct PixelBranchConfig {
  int enc_dim = 64;
  int enc_depth = 2;
  int enc_heads = 4;
  int dec_dim = 32;
  int dec_depth = 2;
  int dec_heads = 4;
  double beta_i = 0.75;
  bool norm_pix = true;
};

struct RaeConfig {
  RaeVariant variant = RaeVariant::length;
  int p_e = 128;  // region encoder width
  int p_d = 128;  // neck / region decoder width
  int heads = 4;
  int enc_depth = 1;
  int neck_depth = 1;
  int dec_depth = 1;
  int head_hidden = 32;  // hidden width of the 3-layer predictor
  double beta_r = 0.75;
  int k = 8;
  MaskSharing sharing = MaskSharing::shared;
  bool loss_masked_only = true;
};

struct ModelConfig {
  int image_size = 32;
  int patch = 4;
  int channels = 3;
  int mlp_ratio = 4;
  PixelBranchConfig pixel;
  RaeConfig region;
  CrossFeed cross_feed = CrossFeed::pix_to_reg;

  int grid() const { return image_size / patch; }
  int num_patches() const { return grid() * grid(); }
  int patch_area() const { return patch * patch; }
  int pixel_patch_len() const { return patch * patch * channels; }
  // Throws std::invalid_argument on inconsistent geometry.
  void validate() const;
};

struct TrainConfig {
  double base_lr = 1e-4;
  int batch_size = 8;
  int total_steps = 200;
  int warmup_steps = 10;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0: only at the end
  int log_every = 1;
  bool freeze_encoder = false;  // pixel encoder receives no updates

  double peak_lr() const { return base_lr * batch_size / 256.0; }
  void validate() const;
};

// Named presets. "vit-b-mae", "vit-b-rmae", "vit-b-rae" reproduce the
// large-scale geometry for FLOPs accounting; "desk" is the trainable default.
ModelConfig preset(const std::string& name);
TrainConfig desk_train_config();

void to_json(nlohmann::json& j, const PixelBranchConfig& c);
void from_json(const nlohmann::json& j, PixelBranchConfig& c);
void to_json(nlohmann::json& j, const RaeConfig& c);
void from_json(const nlohmann::json& j, RaeConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace rmae
