#pragma once

#include <vector>

#include "rmae/config.hpp"
#include "rmae/nn.hpp"

namespace rmae::inline RMAE_ABI {

// Mask-filled pixel-encoder features -> context [N, p_D].
struct Neck {
  Tensor mask_token;  // [enc_dim]
  Tensor pos;         // [N, enc_dim], fixed
  Linear proj;
  std::vector<SelfAttnBlock> blocks;
  LayerNorm norm;

  Neck() = default;
  Neck(ParamSet& ps, const ModelConfig& cfg);
  // visible: [Lv, enc_dim]. A null pointer builds the context from mask
  // tokens and positions alone.
  Tensor operator()(const Tensor* visible, const MaskPattern& mask) const;
};

// Binary region patches of a batch as a constant tensor [k, N, p*p].
Tensor region_tensor(const RegionBatch& batch);

struct RegionOutput {
  Tensor logits;  // [k, N, p*p]
  Tensor to_pixels;  // [N, dec_dim] region features for the pixel decoder, or undefined
};

// Region encoder, decoder and predictor for the configured variant.
class RegionBranch {
 public:
  RegionBranch() = default;
  RegionBranch(ParamSet& ps, const ModelConfig& cfg);

  RaeVariant variant() const { return cfg_.variant; }
  // Region count the channel variant was built for.
  int fixed_k() const { return cfg_.k; }

  RegionOutput operator()(const RegionBatch& batch, const MaskPattern& mask,
                          const Tensor& context) const;

  // Every head output bias set to logit(prior).
  void init_bias(double prior);

 private:
  Tensor encode(const Tensor& regions, const MaskPattern& mask) const;
  Tensor decode_spatial(const Tensor& enc, const MaskPattern& mask, const Tensor& context) const;
  Tensor decode_length(const Tensor& queries, const Tensor& context) const;
  Tensor feed_pixels(const Tensor& enc, const MaskPattern& mask) const;

  RaeConfig cfg_;
  int n_ = 0;
  int pp_ = 0;
  bool feeds_pixels_ = false;

  Linear embed_;
  Tensor pos_e_;  // [N, p_E]
  std::vector<SelfAttnBlock> enc_blocks_;
  LayerNorm enc_norm_;
  Linear f_;
  Tensor mask_token_;  // [p_D]
  Tensor pos_d_;       // [N, p_D]

  // channel / batch
  std::vector<SelfAttnBlock> dec_blocks_;
  LayerNorm dec_norm_;

  // length
  std::vector<CrossAttnBlock> cross_blocks_;
  LayerNorm q_norm1_, q_norm2_;
  Attention q_attn_;
  Tensor expand_w_;  // [p_D, p_D]

  MlpHead head_;

  // reg_to_pix / bidirectional
  Linear h_;
  Tensor feed_token_;  // [dec_dim]
  Tensor zero_pos_;    // [N, dec_dim]
};

// BCE on logits against region patches; weights are 1 on masked patches (or
// on all patches when masked_only is false).
Tensor region_loss(const Tensor& logits, const RegionBatch& target, const MaskPattern& mask,
                   bool masked_only = true);

}  // namespace rmae::inline RMAE_ABI
