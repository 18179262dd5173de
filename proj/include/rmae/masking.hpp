#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rmae/regions.hpp"
#include "rmae/rng.hpp"

namespace rmae {

// Per-patch visibility. Exactly masked_count(n, ratio) patches are hidden.
struct MaskPattern {
  int n = 0;
  double ratio = 0.0;
  std::vector<std::uint8_t> masked;

  int num_masked() const;
  int num_visible() const { return n - num_masked(); }
  bool is_masked(int i) const { return masked[static_cast<std::size_t>(i)] != 0; }
  std::vector<int> visible_indices() const;
  std::vector<int> masked_indices() const;
  bool operator==(const MaskPattern& o) const { return n == o.n && masked == o.masked; }
};

// round(n * beta), half rounded up.
int masked_count(int n, double beta);

MaskPattern all_visible(int n);
MaskPattern mask_from_visible(int n, const std::vector<int>& visible);

// Uniformly random subset of masked_count(n, beta) patches; throws when that
// would hide every patch.
MaskPattern sample_mask(int n, double beta, Rng& rng);

// Shared masking: the region branch uses the image mask unchanged.
MaskPattern shared_mask(const MaskPattern& image_mask);

enum class MaskSharing { shared, independent };

// Region mask for ratio beta_r. Shared with equal ratios is the image mask
// itself; shared with different ratios is nested (a superset of the image mask
// when beta_r > beta_i, a subset otherwise) so the overlap is maximal.
// Independent draws a fresh mask.
MaskPattern region_mask_for(const MaskPattern& image_mask, double beta_r,
                            MaskSharing sharing, Rng& rng);

// Masks for several ratios drawn from one random ordering, so a higher ratio
// hides a superset of what a lower one hides.
std::vector<MaskPattern> nested_masks(int n, const std::vector<double>& betas, Rng& rng);

// k patchified binary region maps. patches is k x N x (p*p), region-major.
struct RegionBatch {
  int k = 0;
  int n = 0;
  int patch_area = 0;
  std::vector<int> indices;  // into the source RegionSet
  std::vector<std::uint8_t> patches;

  std::uint8_t at(int region, int patch, int pixel) const {
    return patches[(static_cast<std::size_t>(region) * n + patch) * patch_area + pixel];
  }
  // Whether region `r` has any foreground pixel in patch `i`.
  bool foreground_patch(int r, int i) const;
};

// H x W binary map -> N x (p*p) patches in row-major patch order.
std::vector<std::uint8_t> patchify_region(const RegionMap& map, int width, int height, int p);

class EmptyRegionPool : public std::runtime_error {
 public:
  EmptyRegionPool() : std::runtime_error("no region has a visible foreground patch") {}
};

// Draws k regions with replacement among those with at least one visible
// foreground patch under `mask`.
RegionBatch sample_regions(const RegionSet& rs, const MaskPattern& mask, int k, int p, Rng& rng);

// Builds a batch from explicit region indices (no visibility filtering).
RegionBatch make_region_batch(const RegionSet& rs, const std::vector<int>& indices, int p);

struct MaskedRegions {
  MaskPattern image_mask;
  MaskPattern region_mask;
  RegionBatch batch;
  int mask_attempts = 1;
  bool fell_back = false;
};

// Training-time draw: image mask first, then the region mask, then regions.
// An empty candidate pool triggers up to `max_resamples` fresh masks, after
// which regions are drawn from the full list.
MaskedRegions sample_masked_regions(const RegionSet& rs, int n, double beta_i, double beta_r,
                                    MaskSharing sharing, int k, int p, Rng& rng,
                                    int max_resamples = 8);

}  // namespace rmae
