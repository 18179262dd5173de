#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rmae/config.hpp"
#include "rmae/mae.hpp"
#include "rmae/rae.hpp"

namespace rmae::inline RMAE_ABI {

struct ForwardResult {
  Tensor pixel_loss;     // [1]; zero when the pixel decoder is absent
  Tensor region_loss;    // [1]; zero when the region branch is absent
  Tensor total;          // pixel_loss + region_loss
  Tensor pixel_pred;     // [N, p*p*C] or undefined
  Tensor region_logits;  // [k, N, p*p] or undefined
};

// Pixel branch, neck and region branch wired by the cross-feed mode.
class RMaeModel {
 public:
  RMaeModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // patches: N x (p*p*C) from patchify(). `regions` is required whenever the
  // mode has a region branch.
  ForwardResult forward(const std::vector<float>& patches, const MaskPattern& image_mask,
                        const RegionBatch* regions, const MaskPattern& region_mask) const;

  // Region logits [k, N, p*p] without the pixel decoder or any loss.
  Tensor region_logits(const std::vector<float>& patches, const MaskPattern& image_mask,
                       const RegionBatch& regions, const MaskPattern& region_mask) const;

  // Head-averaged last-encoder-block attention of `query` over all N patches
  // with nothing masked; sums to 1.
  std::vector<double> attention_dump(const std::vector<float>& patches, int query) const;

  void init_region_bias(double prior);
  bool has_region_branch() const { return region_.has_value(); }

 private:
  Tensor patch_tensor(const std::vector<float>& patches) const;
  Tensor context(const Tensor& visible, const MaskPattern& image_mask) const;

  ModelConfig cfg_;
  ParamSet params_;
  PixelEncoder encoder_;
  std::optional<PixelDecoder> decoder_;
  std::optional<Neck> neck_;
  std::optional<RegionBranch> region_;
};

}  // namespace rmae::inline RMAE_ABI
