#pragma once

#include <vector>

#include "rmae/config.hpp"
#include "rmae/nn.hpp"

namespace rmae::inline RMAE_ABI {

// Constant tensor from host floats (image patches, targets).
Tensor constant(Shape shape, const std::vector<float>& values);

// Embeds all N patches, adds positions, keeps the visible rows and runs the
// encoder stack. Only num_visible tokens ever enter a block.
struct PixelEncoder {
  PatchEmbed embed;
  Tensor pos;  // [N, enc_dim], fixed
  std::vector<SelfAttnBlock> blocks;
  LayerNorm norm;

  PixelEncoder() = default;
  PixelEncoder(ParamSet& ps, const ModelConfig& cfg);
  // patches: [N, p*p*C] -> [Lv, enc_dim]. `last_attn` receives the softmax
  // weights of the final block.
  Tensor operator()(const Tensor& patches, const MaskPattern& mask,
                    std::vector<Scalar>* last_attn = nullptr) const;
};

struct PixelDecoder {
  Linear embed;
  Tensor mask_token;  // [dec_dim]
  Tensor pos;         // [N, dec_dim], fixed
  std::vector<SelfAttnBlock> blocks;
  LayerNorm norm;
  Linear head;

  PixelDecoder() = default;
  PixelDecoder(ParamSet& ps, const ModelConfig& cfg);
  // visible: [Lv, enc_dim] -> [N, p*p*C]. `extra` ([N, dec_dim]) is added to
  // the filled decoder input when regions feed the pixel branch.
  Tensor operator()(const Tensor& visible, const MaskPattern& mask,
                    const Tensor* extra = nullptr) const;
};

// Regression targets [N * p*p*C]; with norm_pix each patch is shifted to zero
// mean and divided by (std + 1e-6).
std::vector<Scalar> pixel_targets(const std::vector<float>& patches, int patch_len,
                                  bool norm_pix);

// Mean squared error over masked patches only. Zero when nothing is masked.
Tensor pixel_loss(const Tensor& pred, const std::vector<Scalar>& target,
                  const MaskPattern& mask);

}  // namespace rmae::inline RMAE_ABI
