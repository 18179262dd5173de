#include "rmae/config.hpp"

#include <stdexcept>

namespace rmae {

std::string to_string(RaeVariant v) {
  switch (v) {
    case RaeVariant::channel: return "channel";
    case RaeVariant::batch: return "batch";
    case RaeVariant::length: return "length";
  }
  return "?";
}

std::string to_string(CrossFeed m) {
  switch (m) {
    case CrossFeed::pix_to_reg: return "pix_to_reg";
    case CrossFeed::reg_to_pix: return "reg_to_pix";
    case CrossFeed::bidirectional: return "bidirectional";
    case CrossFeed::rae_only: return "rae_only";
    case CrossFeed::mae_only: return "mae_only";
  }
  return "?";
}

RaeVariant rae_variant_from_string(const std::string& s) {
  if (s == "channel") return RaeVariant::channel;
  if (s == "batch") return RaeVariant::batch;
  if (s == "length") return RaeVariant::length;
  throw std::invalid_argument("unknown region variant '" + s + "'");
}

CrossFeed cross_feed_from_string(const std::string& s) {
  if (s == "pix_to_reg") return CrossFeed::pix_to_reg;
  if (s == "reg_to_pix") return CrossFeed::reg_to_pix;
  if (s == "bidirectional") return CrossFeed::bidirectional;
  if (s == "rae_only") return CrossFeed::rae_only;
  if (s == "mae_only") return CrossFeed::mae_only;
  throw std::invalid_argument("unknown cross-feed mode '" + s + "'");
}

bool has_pixel_branch(CrossFeed m) { return m != CrossFeed::rae_only; }
bool has_region_branch(CrossFeed m) { return m != CrossFeed::mae_only; }
bool pixels_feed_regions(CrossFeed m) {
  return m == CrossFeed::pix_to_reg || m == CrossFeed::bidirectional || m == CrossFeed::rae_only;
}
bool regions_feed_pixels(CrossFeed m) {
  return m == CrossFeed::reg_to_pix || m == CrossFeed::bidirectional;
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("invalid model config: " + what);
  };
  need(patch > 0 && image_size > 0 && image_size % patch == 0,
       "image_size must be a positive multiple of patch");
  need(channels > 0 && mlp_ratio > 0, "channels and mlp_ratio must be positive");
  need(pixel.enc_heads > 0 && pixel.enc_dim % pixel.enc_heads == 0,
       "enc_dim must be divisible by enc_heads");
  need(pixel.dec_heads > 0 && pixel.dec_dim % pixel.dec_heads == 0,
       "dec_dim must be divisible by dec_heads");
  need(pixel.enc_dim % 4 == 0 && pixel.dec_dim % 4 == 0,
       "branch widths must be divisible by 4 for 2D position embeddings");
  need(pixel.enc_depth >= 1 && pixel.dec_depth >= 1, "depths must be >= 1");
  need(pixel.beta_i >= 0.0 && pixel.beta_i < 1.0, "beta_i must be in [0, 1)");
  if (has_region_branch(cross_feed)) {
    need(region.heads > 0 && region.p_e % region.heads == 0 && region.p_d % region.heads == 0,
         "region widths must be divisible by region heads");
    need(region.p_e % 4 == 0 && region.p_d % 4 == 0, "region widths must be divisible by 4");
    need(region.enc_depth >= 1 && region.neck_depth >= 1 && region.dec_depth >= 1,
         "region depths must be >= 1");
    need(region.k >= 1, "k must be >= 1");
    need(region.head_hidden >= 1, "head_hidden must be >= 1");
    need(region.beta_r >= 0.0 && region.beta_r < 1.0, "beta_r must be in [0, 1)");
  }
}

void TrainConfig::validate() const {
  if (!(base_lr > 0.0)) throw std::invalid_argument("base_lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (warmup_steps < 0 || warmup_steps >= total_steps) {
    throw std::invalid_argument("warmup_steps must be in [0, total_steps)");
  }
}

ModelConfig preset(const std::string& name) {
  ModelConfig c;
  if (name == "desk") {
    c.region.p_e = 64;
    c.region.p_d = 64;
    c.pixel.norm_pix = false;
    return c;
  }
  if (name.rfind("vit-b", 0) == 0) {
    c.image_size = 224;
    c.patch = 16;
    c.pixel.enc_dim = 768;
    c.pixel.enc_depth = 12;
    c.pixel.enc_heads = 12;
    c.pixel.dec_dim = 512;
    c.pixel.dec_depth = 8;
    c.pixel.dec_heads = 16;
    c.pixel.beta_i = 0.75;
    c.region = RaeConfig{};
    if (name == "vit-b-mae") {
      c.cross_feed = CrossFeed::mae_only;
    } else if (name == "vit-b-rmae") {
      c.cross_feed = CrossFeed::pix_to_reg;
    } else if (name == "vit-b-rae") {
      c.cross_feed = CrossFeed::rae_only;
    } else {
      throw std::invalid_argument("unknown preset '" + name + "'");
    }
    return c;
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

TrainConfig desk_train_config() {
  TrainConfig t;
  t.base_lr = 0.05;
  t.batch_size = 8;
  t.total_steps = 200;
  t.warmup_steps = 10;
  return t;
}

void to_json(nlohmann::json& j, const PixelBranchConfig& c) {
  j = {{"enc_dim", c.enc_dim},     {"enc_depth", c.enc_depth}, {"enc_heads", c.enc_heads},
       {"dec_dim", c.dec_dim},     {"dec_depth", c.dec_depth}, {"dec_heads", c.dec_heads},
       {"beta_i", c.beta_i},       {"norm_pix", c.norm_pix}};
}

void from_json(const nlohmann::json& j, PixelBranchConfig& c) {
  c.enc_dim = j.value("enc_dim", c.enc_dim);
  c.enc_depth = j.value("enc_depth", c.enc_depth);
  c.enc_heads = j.value("enc_heads", c.enc_heads);
  c.dec_dim = j.value("dec_dim", c.dec_dim);
  c.dec_depth = j.value("dec_depth", c.dec_depth);
  c.dec_heads = j.value("dec_heads", c.dec_heads);
  c.beta_i = j.value("beta_i", c.beta_i);
  c.norm_pix = j.value("norm_pix", c.norm_pix);
}

void to_json(nlohmann::json& j, const RaeConfig& c) {
  j = {{"variant", to_string(c.variant)},
       {"p_e", c.p_e},
       {"p_d", c.p_d},
       {"heads", c.heads},
       {"enc_depth", c.enc_depth},
       {"neck_depth", c.neck_depth},
       {"dec_depth", c.dec_depth},
       {"head_hidden", c.head_hidden},
       {"beta_r", c.beta_r},
       {"k", c.k},
       {"mask_sharing", c.sharing == MaskSharing::shared ? "shared" : "independent"},
       {"loss_masked_only", c.loss_masked_only}};
}

void from_json(const nlohmann::json& j, RaeConfig& c) {
  if (j.contains("variant")) c.variant = rae_variant_from_string(j["variant"].get<std::string>());
  c.p_e = j.value("p_e", c.p_e);
  c.p_d = j.value("p_d", c.p_d);
  c.heads = j.value("heads", c.heads);
  c.enc_depth = j.value("enc_depth", c.enc_depth);
  c.neck_depth = j.value("neck_depth", c.neck_depth);
  c.dec_depth = j.value("dec_depth", c.dec_depth);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.beta_r = j.value("beta_r", c.beta_r);
  c.k = j.value("k", c.k);
  if (j.contains("mask_sharing")) {
    const auto s = j["mask_sharing"].get<std::string>();
    if (s == "shared") {
      c.sharing = MaskSharing::shared;
    } else if (s == "independent") {
      c.sharing = MaskSharing::independent;
    } else {
      throw std::invalid_argument("unknown mask_sharing '" + s + "'");
    }
  }
  c.loss_masked_only = j.value("loss_masked_only", c.loss_masked_only);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"image_size", c.image_size}, {"patch", c.patch},   {"channels", c.channels},
       {"mlp_ratio", c.mlp_ratio},   {"pixel", c.pixel},   {"region", c.region},
       {"cross_feed", to_string(c.cross_feed)}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.image_size = j.value("image_size", c.image_size);
  c.patch = j.value("patch", c.patch);
  c.channels = j.value("channels", c.channels);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  if (j.contains("pixel")) from_json(j["pixel"], c.pixel);
  if (j.contains("region")) from_json(j["region"], c.region);
  if (j.contains("cross_feed")) c.cross_feed = cross_feed_from_string(j["cross_feed"].get<std::string>());
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"base_lr", c.base_lr},
       {"batch_size", c.batch_size},
       {"total_steps", c.total_steps},
       {"warmup_steps", c.warmup_steps},
       {"weight_decay", c.weight_decay},
       {"betas", {c.beta1, c.beta2}},
       {"grad_clip", c.grad_clip},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every},
       {"log_every", c.log_every},
       {"freeze_encoder", c.freeze_encoder}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.base_lr = j.value("base_lr", c.base_lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  if (j.contains("betas")) {
    auto b = j["betas"].get<std::vector<double>>();
    if (b.size() != 2) throw std::invalid_argument("betas must have two entries");
    c.beta1 = b[0];
    c.beta2 = b[1];
  }
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.log_every = j.value("log_every", c.log_every);
  c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
}

}  // namespace rmae
