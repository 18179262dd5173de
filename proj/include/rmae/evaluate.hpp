#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "rmae/trainer.hpp"

namespace rmae {

struct Metrics {
  double region_bce = 0;      // masked patches only
  double completion_iou = 0;  // mean over sampled regions
  double baseline_iou = 0;    // constant predictor at the foreground prior
  double pixel_mse = 0;       // masked patches, model targets
  int images = 0;

  nlohmann::json to_json() const;
};

// Same masks and regions for a given seed, independent of the model.
Metrics evaluate(const RMaeModel& model, const Dataset& heldout, std::uint64_t seed,
                 double prior = 0.5);

// Completion IoU per image for each ratio, using nested masks so a higher
// ratio hides a superset of patches. iou[b][i] is image i at betas[b]; images
// without an eligible region are skipped for all ratios.
struct RefinementCurve {
  std::vector<double> betas;
  std::vector<std::vector<double>> iou;
  std::vector<double> mean() const;
};

RefinementCurve refinement_curve(const RMaeModel& model, const Dataset& heldout,
                                 const std::vector<double>& betas, std::uint64_t seed,
                                 bool full_image = false);

// Lower percentile of the bootstrap distribution of mean(a - b) over paired
// samples.
double paired_bootstrap_lower(const std::vector<double>& a, const std::vector<double>& b,
                              double percentile, int resamples, std::uint64_t seed);

}  // namespace rmae
