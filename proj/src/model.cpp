#include "rmae/model.hpp"

#include <stdexcept>

namespace rmae::inline RMAE_ABI {

RMaeModel::RMaeModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg), params_(seed) {
  cfg_.validate();
  encoder_ = PixelEncoder(params_, cfg_);
  if (has_pixel_branch(cfg_.cross_feed)) decoder_.emplace(params_, cfg_);
  if (rmae::has_region_branch(cfg_.cross_feed)) {
    neck_.emplace(params_, cfg_);
    region_.emplace(params_, cfg_);
  }
}

Tensor RMaeModel::patch_tensor(const std::vector<float>& patches) const {
  const int n = cfg_.num_patches();
  const int len = cfg_.pixel_patch_len();
  if (patches.size() != static_cast<std::size_t>(n) * len) {
    throw ShapeError("model expects " + std::to_string(n) + " patches of " + std::to_string(len) +
                     " values, got " + std::to_string(patches.size()) + " values");
  }
  return constant({n, len}, patches);
}

Tensor RMaeModel::context(const Tensor& visible, const MaskPattern& image_mask) const {
  if (pixels_feed_regions(cfg_.cross_feed)) return (*neck_)(&visible, image_mask);
  return (*neck_)(nullptr, image_mask);
}

ForwardResult RMaeModel::forward(const std::vector<float>& patches, const MaskPattern& image_mask,
                                 const RegionBatch* regions,
                                 const MaskPattern& region_mask) const {
  if (region_ && !regions) {
    throw std::invalid_argument("cross-feed mode " + to_string(cfg_.cross_feed) +
                                " needs a region batch");
  }
  const Tensor x = patch_tensor(patches);
  const Tensor visible = encoder_(x, image_mask);

  ForwardResult out;
  Tensor to_pixels;
  if (region_) {
    RegionOutput r = (*region_)(*regions, region_mask, context(visible, image_mask));
    out.region_logits = r.logits;
    out.region_loss =
        region_loss(r.logits, *regions, region_mask, cfg_.region.loss_masked_only);
    to_pixels = r.to_pixels;
  } else {
    out.region_loss = Tensor::zeros({1});
  }
  if (decoder_) {
    out.pixel_pred = (*decoder_)(visible, image_mask, to_pixels.defined() ? &to_pixels : nullptr);
    out.pixel_loss =
        pixel_loss(out.pixel_pred,
                   pixel_targets(patches, cfg_.pixel_patch_len(), cfg_.pixel.norm_pix),
                   image_mask);
  } else {
    out.pixel_loss = Tensor::zeros({1});
  }
  out.total = add(out.pixel_loss, out.region_loss);
  return out;
}

Tensor RMaeModel::region_logits(const std::vector<float>& patches, const MaskPattern& image_mask,
                                const RegionBatch& regions,
                                const MaskPattern& region_mask) const {
  if (!region_) {
    throw std::invalid_argument("cross-feed mode " + to_string(cfg_.cross_feed) +
                                " has no region branch");
  }
  const Tensor visible = encoder_(patch_tensor(patches), image_mask);
  return (*region_)(regions, region_mask, context(visible, image_mask)).logits;
}

std::vector<double> RMaeModel::attention_dump(const std::vector<float>& patches, int query) const {
  const int n = cfg_.num_patches();
  if (query < 0 || query >= n) {
    throw std::out_of_range("query patch " + std::to_string(query) + " outside [0, " +
                            std::to_string(n) + ")");
  }
  std::vector<Scalar> weights;
  {
    NoGradGuard no_grad;
    encoder_(patch_tensor(patches), all_visible(n), &weights);
  }
  const int heads = cfg_.pixel.enc_heads;
  std::vector<double> row(static_cast<std::size_t>(n), 0.0);
  for (int h = 0; h < heads; ++h) {
    const Scalar* w = weights.data() + (static_cast<std::size_t>(h) * n + query) * n;
    for (int j = 0; j < n; ++j) row[j] += w[j];
  }
  double total = 0;
  for (double v : row) total += v;
  for (double& v : row) v /= total;
  return row;
}

void RMaeModel::init_region_bias(double prior) {
  if (region_) region_->init_bias(prior);
}

}  // namespace rmae::inline RMAE_ABI
