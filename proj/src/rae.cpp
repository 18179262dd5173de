#include "rmae/rae.hpp"

#include <algorithm>
#include <cmath>

namespace rmae::inline RMAE_ABI {

Neck::Neck(ParamSet& ps, const ModelConfig& cfg)
    : mask_token(ps.add("neck.mask_token", {cfg.pixel.enc_dim}, Init::normal02)),
      pos(sincos_pos_embed_2d(cfg.grid(), cfg.grid(), cfg.pixel.enc_dim)),
      proj(ps, "neck.proj", cfg.pixel.enc_dim, cfg.region.p_d),
      norm(ps, "neck.norm", cfg.region.p_d) {
  for (int i = 0; i < cfg.region.neck_depth; ++i) {
    blocks.emplace_back(ps, "neck.block" + std::to_string(i), cfg.region.p_d,
                        cfg.region.heads, cfg.mlp_ratio);
  }
}

Tensor Neck::operator()(const Tensor* visible, const MaskPattern& mask) const {
  Tensor x = visible ? mask_fill(*visible, mask, mask_token, pos)
                     : mask_fill(Tensor(), mask_from_visible(mask.n, {}), mask_token, pos);
  x = proj(x);
  for (const auto& b : blocks) x = b(x);
  return norm(x);
}

Tensor region_tensor(const RegionBatch& batch) {
  std::vector<Scalar> v(batch.patches.begin(), batch.patches.end());
  return Tensor::from({batch.k, batch.n, batch.patch_area}, std::move(v));
}

RegionBranch::RegionBranch(ParamSet& ps, const ModelConfig& cfg)
    : cfg_(cfg.region),
      n_(cfg.num_patches()),
      pp_(cfg.patch_area()),
      feeds_pixels_(regions_feed_pixels(cfg.cross_feed)) {
  const RaeConfig& r = cfg.region;
  const int in = r.variant == RaeVariant::channel ? r.k * pp_ : pp_;
  embed_ = Linear(ps, "reg.embed", in, r.p_e);
  pos_e_ = sincos_pos_embed_2d(cfg.grid(), cfg.grid(), r.p_e);
  for (int i = 0; i < r.enc_depth; ++i) {
    enc_blocks_.emplace_back(ps, "reg.enc" + std::to_string(i), r.p_e, r.heads, cfg.mlp_ratio);
  }
  enc_norm_ = LayerNorm(ps, "reg.enc_norm", r.p_e);
  f_ = Linear(ps, "reg.f", r.p_e, r.p_d);

  if (r.variant == RaeVariant::length) {
    for (int i = 0; i + 1 < r.dec_depth; ++i) {
      cross_blocks_.emplace_back(ps, "reg.dec" + std::to_string(i), r.p_d, r.heads,
                                 cfg.mlp_ratio);
    }
    const std::string last = "reg.dec" + std::to_string(r.dec_depth - 1);
    q_norm1_ = LayerNorm(ps, last + ".norm1", r.p_d);
    q_attn_ = Attention(ps, last + ".self_attn", r.p_d, r.heads);
    q_norm2_ = LayerNorm(ps, last + ".norm2", r.p_d);
    expand_w_ = ps.add(last + ".expand", {r.p_d, r.p_d}, Init::xavier);
  } else {
    mask_token_ = ps.add("reg.mask_token", {r.p_d}, Init::normal02);
    pos_d_ = sincos_pos_embed_2d(cfg.grid(), cfg.grid(), r.p_d);
    for (int i = 0; i < r.dec_depth; ++i) {
      dec_blocks_.emplace_back(ps, "reg.dec" + std::to_string(i), r.p_d, r.heads,
                               cfg.mlp_ratio);
    }
    dec_norm_ = LayerNorm(ps, "reg.dec_norm", r.p_d);
  }
  const int out = r.variant == RaeVariant::channel ? r.k * pp_ : pp_;
  head_ = MlpHead(ps, "reg.head", r.p_d, r.head_hidden, out);

  if (feeds_pixels_) {
    h_ = Linear(ps, "reg.h", r.p_e, cfg.pixel.dec_dim);
    feed_token_ = ps.add("reg.feed_token", {cfg.pixel.dec_dim}, Init::normal02);
    zero_pos_ = Tensor::zeros({n_, cfg.pixel.dec_dim});
  }
}

void RegionBranch::init_bias(double prior) {
  const double p = std::clamp(prior, 1e-4, 1.0 - 1e-4);
  const Scalar logit = static_cast<Scalar>(std::log(p / (1.0 - p)));
  for (auto& v : head_.fc3.bias.data()) v = logit;
}

// regions: [k, N, pp]. Channel -> [Lv, p_E]; batch and length -> [k, Lv, p_E].
Tensor RegionBranch::encode(const Tensor& regions, const MaskPattern& mask) const {
  Tensor x;
  if (cfg_.variant == RaeVariant::channel) {
    const int k = regions.dim(0);
    x = reshape(transpose(regions, 0, 1), {n_, k * pp_});
  } else {
    x = regions;
  }
  x = take_visible(x, mask);
  x = add(embed_(x), take_visible(pos_e_, mask));
  for (const auto& b : enc_blocks_) x = b(x);
  return enc_norm_(x);
}

Tensor RegionBranch::decode_spatial(const Tensor& enc, const MaskPattern& mask,
                                    const Tensor& context) const {
  Tensor x = add(mask_fill(f_(enc), mask, mask_token_, pos_d_), context);
  for (const auto& b : dec_blocks_) x = b(x);
  Tensor logits = head_(dec_norm_(x));
  if (cfg_.variant == RaeVariant::channel) {
    logits = transpose(reshape(logits, {n_, cfg_.k, pp_}), 0, 1);
  }
  return logits;
}

Tensor RegionBranch::decode_length(const Tensor& queries, const Tensor& context) const {
  Tensor q = queries;
  for (const auto& b : cross_blocks_) q = b(q, context);
  Tensor h = q_norm1_(q);
  q = add(q, q_attn_(h, h));
  return head_(expanded_cross_attn(q_norm2_(q), context, expand_w_));
}

Tensor RegionBranch::feed_pixels(const Tensor& enc, const MaskPattern& mask) const {
  Tensor filled = mask_fill(h_(enc), mask, feed_token_, zero_pos_);
  return filled.rank() == 3 ? mean(filled, 0) : filled;
}

RegionOutput RegionBranch::operator()(const RegionBatch& batch, const MaskPattern& mask,
                                      const Tensor& context) const {
  if (batch.n != n_ || batch.patch_area != pp_ || mask.n != n_) {
    throw ShapeError("region branch: batch of " + std::to_string(batch.n) + "x" +
                     std::to_string(batch.patch_area) + " patches and mask of " +
                     std::to_string(mask.n) + " for geometry " + std::to_string(n_) + "x" +
                     std::to_string(pp_));
  }
  if (cfg_.variant == RaeVariant::channel && batch.k != cfg_.k) {
    throw ShapeError("channel variant built for k=" + std::to_string(cfg_.k) + ", got k=" +
                     std::to_string(batch.k));
  }
  if (batch.k < 1) throw ShapeError("region branch: empty region batch");
  if (mask.num_visible() < 1) throw ShapeError("region branch: no visible patch");

  Tensor enc = encode(region_tensor(batch), mask);
  RegionOutput out;
  if (cfg_.variant == RaeVariant::length) {
    out.logits = decode_length(f_(mean(enc, 1)), context);
  } else {
    out.logits = decode_spatial(enc, mask, context);
  }
  if (feeds_pixels_) out.to_pixels = feed_pixels(enc, mask);
  return out;
}

Tensor region_loss(const Tensor& logits, const RegionBatch& target, const MaskPattern& mask,
                   bool masked_only) {
  if (logits.rank() != 3 || logits.dim(0) != target.k || logits.dim(1) != target.n ||
      logits.dim(2) != target.patch_area || mask.n != target.n) {
    throw ShapeError("region_loss: logits " + shape_str(logits.shape()) + " vs targets [" +
                     std::to_string(target.k) + ", " + std::to_string(target.n) + ", " +
                     std::to_string(target.patch_area) + "]");
  }
  std::vector<Scalar> t(target.patches.begin(), target.patches.end());
  std::vector<Scalar> w(t.size(), Scalar(1));
  if (masked_only) {
    const std::size_t pa = static_cast<std::size_t>(target.patch_area);
    for (int r = 0; r < target.k; ++r)
      for (int i = 0; i < target.n; ++i) {
        if (mask.is_masked(i)) continue;
        const std::size_t off = (static_cast<std::size_t>(r) * target.n + i) * pa;
        std::fill_n(w.begin() + static_cast<std::ptrdiff_t>(off), pa, Scalar(0));
      }
  }
  return bce_with_logits(logits, t, w);
}

}  // namespace rmae::inline RMAE_ABI
