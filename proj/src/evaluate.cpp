#include "rmae/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "rmae/completion.hpp"

namespace rmae {

nlohmann::json Metrics::to_json() const {
  return {{"region_bce", region_bce},
          {"completion_iou", completion_iou},
          {"baseline_iou", baseline_iou},
          {"pixel_mse", pixel_mse},
          {"images", images}};
}

Metrics evaluate(const RMaeModel& model, const Dataset& heldout, std::uint64_t seed,
                 double prior) {
  const ModelConfig& mc = model.config();
  if (heldout.size() == 0) return {};
  if (heldout.patch != mc.patch || heldout.samples.front().image.width != mc.image_size) {
    throw std::invalid_argument("held-out images do not match the model geometry");
  }
  Rng rng(seed);
  NoGradGuard no_grad;
  Metrics m;
  std::size_t regions = 0;
  const std::vector<double> constant(static_cast<std::size_t>(mc.num_patches()) * mc.patch_area(),
                                     prior);
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    MaskedRegions mr =
        sample_masked_regions(heldout.regions[i], mc.num_patches(), mc.pixel.beta_i,
                              mc.region.beta_r, mc.region.sharing, mc.region.k, mc.patch, rng);
    ForwardResult fr = model.forward(heldout.patches[i], mr.image_mask, &mr.batch, mr.region_mask);
    m.region_bce += fr.region_loss.item();
    m.pixel_mse += fr.pixel_loss.item();
    if (fr.region_logits.defined()) {
      const auto x = fr.region_logits.data();
      const std::size_t per = static_cast<std::size_t>(mr.batch.n) * mr.batch.patch_area;
      for (int r = 0; r < mr.batch.k; ++r) {
        std::vector<double> probs(per);
        for (std::size_t j = 0; j < per; ++j) {
          probs[j] = 1.0 / (1.0 + std::exp(-static_cast<double>(x[r * per + j])));
        }
        m.completion_iou += completion_iou(probs, mr.batch, r, mr.region_mask);
        m.baseline_iou += completion_iou(constant, mr.batch, r, mr.region_mask);
        ++regions;
      }
    }
    ++m.images;
  }
  m.region_bce /= m.images;
  m.pixel_mse /= m.images;
  if (regions) {
    m.completion_iou /= static_cast<double>(regions);
    m.baseline_iou /= static_cast<double>(regions);
  }
  return m;
}

std::vector<double> RefinementCurve::mean() const {
  std::vector<double> out;
  for (const auto& row : iou) {
    double s = 0;
    for (double v : row) s += v;
    out.push_back(row.empty() ? 0.0 : s / static_cast<double>(row.size()));
  }
  return out;
}

RefinementCurve refinement_curve(const RMaeModel& model, const Dataset& heldout,
                                 const std::vector<double>& betas, std::uint64_t seed,
                                 bool full_image) {
  const ModelConfig& mc = model.config();
  RefinementCurve curve;
  curve.betas = betas;
  curve.iou.assign(betas.size(), {});
  if (betas.empty()) return curve;
  const std::size_t hardest =
      static_cast<std::size_t>(std::max_element(betas.begin(), betas.end()) - betas.begin());
  Rng rng(seed);
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    const RegionSet& rs = heldout.regions[i];
    for (int attempt = 0; attempt < 8; ++attempt) {
      auto masks = nested_masks(mc.num_patches(), betas, rng);
      RegionBatch pick;
      try {
        pick = sample_regions(rs, masks[hardest], 1, mc.patch, rng);
      } catch (const EmptyRegionPool&) {
        continue;
      }
      for (std::size_t b = 0; b < betas.size(); ++b) {
        const Completion c = complete_region(model, heldout.patches[i], pick, masks[b], full_image);
        curve.iou[b].push_back(completion_iou(c.probs, pick, 0, masks[b]));
      }
      break;
    }
  }
  return curve;
}

double paired_bootstrap_lower(const std::vector<double>& a, const std::vector<double>& b,
                              double percentile, int resamples, std::uint64_t seed) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("paired bootstrap needs equal, non-empty samples");
  }
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  Rng rng(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  const auto n = static_cast<std::uint64_t>(diff.size());
  for (auto& m : means) {
    double s = 0;
    for (std::uint64_t j = 0; j < n; ++j) s += diff[rng.below(n)];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const auto idx = static_cast<std::size_t>(
      std::clamp(std::floor(percentile / 100.0 * resamples), 0.0, resamples - 1.0));
  return means[idx];
}

}  // namespace rmae
