#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "rmae/model.hpp"

namespace rmae {

// User clicks on patches. Adding a patch twice keeps the later label.
class PromptSet {
 public:
  std::string image_id;

  void add(int patch, bool foreground) { entries_[patch] = foreground; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::map<int, bool>& entries() const { return entries_; }

  // {"id": ..., "prompts": [{"patch": i, "label": "fg"|"bg"}, ...]}
  static PromptSet parse(const nlohmann::json& body);
  nlohmann::json to_json() const;

 private:
  std::map<int, bool> entries_;
};

struct Completion {
  int n = 0;
  int patch_area = 0;
  double threshold = 0.5;
  std::vector<double> probs;  // N x (p*p)
  std::vector<std::uint8_t> binary;

  // {"probs": [N][p*p], "binary": [N][p*p], "threshold": 0.5}
  nlohmann::json to_json() const;
};

// Decodes one region from its visible patches. `region` holds k=1 map; only
// the rows visible under `visible` are read. The image is visible at the same
// patches unless `full_image` is set.
Completion complete_region(const RMaeModel& model, const std::vector<float>& patches,
                           const RegionBatch& region, const MaskPattern& visible,
                           bool full_image = false);

// Prompts become fully certain visible patches (all ones or all zeros); every
// other patch is masked. Throws on an empty or out-of-range prompt set.
Completion complete_prompts(const RMaeModel& model, const std::vector<float>& patches,
                            const PromptSet& prompts, bool full_image = false);

RegionBatch prompt_region(const PromptSet& prompts, int n, int patch_area);
MaskPattern prompt_mask(const PromptSet& prompts, int n);

// IoU of the completed map (ground truth at visible patches, thresholded
// probabilities at masked ones) against region `r` of `truth`.
double completion_iou(const std::vector<double>& probs, const RegionBatch& truth, int r,
                      const MaskPattern& mask, double threshold = 0.5);

}  // namespace rmae
