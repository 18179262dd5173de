#include "rmae/mae.hpp"

#include <cmath>

namespace rmae::inline RMAE_ABI {

Tensor constant(Shape shape, const std::vector<float>& values) {
  return Tensor::from(std::move(shape), std::vector<Scalar>(values.begin(), values.end()));
}

PixelEncoder::PixelEncoder(ParamSet& ps, const ModelConfig& cfg)
    : embed(ps, "pix.embed", cfg.patch, cfg.channels, cfg.pixel.enc_dim),
      pos(sincos_pos_embed_2d(cfg.grid(), cfg.grid(), cfg.pixel.enc_dim)),
      norm(ps, "pix.enc_norm", cfg.pixel.enc_dim) {
  for (int i = 0; i < cfg.pixel.enc_depth; ++i) {
    blocks.emplace_back(ps, "pix.enc" + std::to_string(i), cfg.pixel.enc_dim,
                        cfg.pixel.enc_heads, cfg.mlp_ratio);
  }
}

Tensor PixelEncoder::operator()(const Tensor& patches, const MaskPattern& mask,
                                std::vector<Scalar>* last_attn) const {
  if (patches.rank() != 2 || patches.dim(0) != mask.n) {
    throw ShapeError("pixel encoder: patches " + shape_str(patches.shape()) + " vs mask of " +
                     std::to_string(mask.n));
  }
  Tensor x = take_visible(add(embed(patches), pos), mask);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    x = blocks[i](x, i + 1 == blocks.size() ? last_attn : nullptr);
  }
  return norm(x);
}

PixelDecoder::PixelDecoder(ParamSet& ps, const ModelConfig& cfg)
    : embed(ps, "pix.dec_embed", cfg.pixel.enc_dim, cfg.pixel.dec_dim),
      mask_token(ps.add("pix.mask_token", {cfg.pixel.dec_dim}, Init::normal02)),
      pos(sincos_pos_embed_2d(cfg.grid(), cfg.grid(), cfg.pixel.dec_dim)),
      norm(ps, "pix.dec_norm", cfg.pixel.dec_dim) {
  for (int i = 0; i < cfg.pixel.dec_depth; ++i) {
    blocks.emplace_back(ps, "pix.dec" + std::to_string(i), cfg.pixel.dec_dim,
                        cfg.pixel.dec_heads, cfg.mlp_ratio);
  }
  head = Linear(ps, "pix.head", cfg.pixel.dec_dim, cfg.pixel_patch_len());
}

Tensor PixelDecoder::operator()(const Tensor& visible, const MaskPattern& mask,
                                const Tensor* extra) const {
  Tensor x = mask_fill(embed(visible), mask, mask_token, pos);
  if (extra) x = add(x, *extra);
  for (const auto& b : blocks) x = b(x);
  return head(norm(x));
}

std::vector<Scalar> pixel_targets(const std::vector<float>& patches, int patch_len,
                                  bool norm_pix) {
  std::vector<Scalar> out(patches.begin(), patches.end());
  if (!norm_pix) return out;
  const std::size_t len = static_cast<std::size_t>(patch_len);
  for (std::size_t off = 0; off + len <= out.size(); off += len) {
    double mu = 0;
    for (std::size_t j = 0; j < len; ++j) mu += out[off + j];
    mu /= static_cast<double>(len);
    double var = 0;
    for (std::size_t j = 0; j < len; ++j) var += (out[off + j] - mu) * (out[off + j] - mu);
    const double sd = std::sqrt(var / static_cast<double>(len));
    for (std::size_t j = 0; j < len; ++j) {
      out[off + j] = static_cast<Scalar>((out[off + j] - mu) / (sd + 1e-6));
    }
  }
  return out;
}

Tensor pixel_loss(const Tensor& pred, const std::vector<Scalar>& target, const MaskPattern& mask) {
  if (pred.rank() != 2 || pred.dim(0) != mask.n || pred.numel() != target.size()) {
    throw ShapeError("pixel_loss: prediction " + shape_str(pred.shape()) + " with " +
                     std::to_string(target.size()) + " targets over " + std::to_string(mask.n) +
                     " patches");
  }
  const int masked = mask.num_masked();
  const int len = pred.dim(1);
  std::vector<Scalar> w(pred.numel(), Scalar(0));
  if (masked > 0) {
    const Scalar unit = Scalar(1) / static_cast<Scalar>(static_cast<double>(masked) * len);
    for (int i = 0; i < mask.n; ++i) {
      if (!mask.is_masked(i)) continue;
      std::fill_n(w.begin() + static_cast<std::ptrdiff_t>(i) * len, len, unit);
    }
  }
  Tensor diff = sub(pred, Tensor::from(pred.shape(), target));
  return weighted_sum(mul(diff, diff), w);
}

}  // namespace rmae::inline RMAE_ABI
