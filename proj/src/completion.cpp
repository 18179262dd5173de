#include "rmae/completion.hpp"

#include <cmath>
#include <stdexcept>

namespace rmae {

PromptSet PromptSet::parse(const nlohmann::json& body) {
  if (!body.is_object()) throw std::invalid_argument("request body must be a JSON object");
  PromptSet ps;
  if (body.contains("id")) {
    const auto& id = body["id"];
    ps.image_id = id.is_string() ? id.get<std::string>() : id.dump();
  }
  if (!body.contains("prompts") || !body["prompts"].is_array()) {
    throw std::invalid_argument("request needs a 'prompts' array");
  }
  for (const auto& p : body["prompts"]) {
    if (!p.is_object() || !p.contains("patch") || !p["patch"].is_number_integer() ||
        !p.contains("label") || !p["label"].is_string()) {
      throw std::invalid_argument("each prompt needs an integer 'patch' and a string 'label'");
    }
    const std::string label = p["label"].get<std::string>();
    if (label != "fg" && label != "bg") {
      throw std::invalid_argument("prompt label must be 'fg' or 'bg', got '" + label + "'");
    }
    ps.add(p["patch"].get<int>(), label == "fg");
  }
  return ps;
}

nlohmann::json PromptSet::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [patch, fg] : entries_) arr.push_back({{"patch", patch}, {"label", fg ? "fg" : "bg"}});
  return {{"id", image_id}, {"prompts", arr}};
}

nlohmann::json Completion::to_json() const {
  nlohmann::json probs_j = nlohmann::json::array();
  nlohmann::json bin_j = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    const auto off = static_cast<std::size_t>(i) * patch_area;
    probs_j.push_back(std::vector<double>(probs.begin() + off, probs.begin() + off + patch_area));
    bin_j.push_back(std::vector<int>(binary.begin() + off, binary.begin() + off + patch_area));
  }
  return {{"probs", probs_j}, {"binary", bin_j}, {"threshold", threshold}};
}

Completion complete_region(const RMaeModel& model, const std::vector<float>& patches,
                           const RegionBatch& region, const MaskPattern& visible,
                           bool full_image) {
  const ModelConfig& cfg = model.config();
  if (!model.has_region_branch()) throw std::invalid_argument("model has no region branch");
  if (region.k != 1 || region.n != cfg.num_patches() || region.patch_area != cfg.patch_area() ||
      visible.n != cfg.num_patches()) {
    throw std::invalid_argument("region completion needs one region matching the model geometry");
  }
  if (visible.num_visible() < 1) {
    throw std::invalid_argument("region completion needs at least one visible patch");
  }
  RegionBatch input = region;
  const std::size_t pa = static_cast<std::size_t>(region.patch_area);
  for (int i = 0; i < region.n; ++i) {
    if (!visible.is_masked(i)) continue;
    std::fill_n(input.patches.begin() + static_cast<std::ptrdiff_t>(i * pa), pa, std::uint8_t{0});
  }
  if (cfg.region.variant == RaeVariant::channel && cfg.region.k != 1) {
    RegionBatch rep;
    rep.k = cfg.region.k;
    rep.n = input.n;
    rep.patch_area = input.patch_area;
    for (int r = 0; r < rep.k; ++r) {
      rep.indices.push_back(input.indices.empty() ? 0 : input.indices[0]);
      rep.patches.insert(rep.patches.end(), input.patches.begin(), input.patches.end());
    }
    input = std::move(rep);
  }

  Tensor logits;
  {
    NoGradGuard no_grad;
    const MaskPattern image_mask = full_image ? all_visible(visible.n) : visible;
    logits = model.region_logits(patches, image_mask, input, visible);
  }
  Completion c;
  c.n = region.n;
  c.patch_area = region.patch_area;
  const std::size_t count = static_cast<std::size_t>(c.n) * pa;
  c.probs.resize(count);
  c.binary.resize(count);
  const auto x = logits.data();
  for (std::size_t j = 0; j < count; ++j) {
    c.probs[j] = 1.0 / (1.0 + std::exp(-static_cast<double>(x[j])));
    c.binary[j] = c.probs[j] > c.threshold ? 1 : 0;
  }
  return c;
}

RegionBatch prompt_region(const PromptSet& prompts, int n, int patch_area) {
  RegionBatch b;
  b.k = 1;
  b.n = n;
  b.patch_area = patch_area;
  b.indices = {0};
  b.patches.assign(static_cast<std::size_t>(n) * patch_area, 0);
  for (const auto& [patch, fg] : prompts.entries()) {
    if (patch < 0 || patch >= n) {
      throw std::out_of_range("prompt patch " + std::to_string(patch) + " outside [0, " +
                              std::to_string(n) + ")");
    }
    if (fg) {
      std::fill_n(b.patches.begin() + static_cast<std::ptrdiff_t>(patch) * patch_area, patch_area,
                  std::uint8_t{1});
    }
  }
  return b;
}

MaskPattern prompt_mask(const PromptSet& prompts, int n) {
  std::vector<int> vis;
  for (const auto& [patch, fg] : prompts.entries()) {
    if (patch < 0 || patch >= n) {
      throw std::out_of_range("prompt patch " + std::to_string(patch) + " outside [0, " +
                              std::to_string(n) + ")");
    }
    vis.push_back(patch);
  }
  return mask_from_visible(n, vis);
}

Completion complete_prompts(const RMaeModel& model, const std::vector<float>& patches,
                            const PromptSet& prompts, bool full_image) {
  if (prompts.empty()) throw std::invalid_argument("at least one prompt is required");
  const ModelConfig& cfg = model.config();
  return complete_region(model, patches,
                         prompt_region(prompts, cfg.num_patches(), cfg.patch_area()),
                         prompt_mask(prompts, cfg.num_patches()), full_image);
}

double completion_iou(const std::vector<double>& probs, const RegionBatch& truth, int r,
                      const MaskPattern& mask, double threshold) {
  const std::size_t pa = static_cast<std::size_t>(truth.patch_area);
  if (probs.size() != static_cast<std::size_t>(truth.n) * pa || mask.n != truth.n) {
    throw std::invalid_argument("completion_iou: size mismatch");
  }
  std::size_t inter = 0, uni = 0;
  for (int i = 0; i < truth.n; ++i) {
    for (std::size_t j = 0; j < pa; ++j) {
      const bool g = truth.at(r, i, static_cast<int>(j)) != 0;
      const bool p = mask.is_masked(i) ? probs[i * pa + j] > threshold : g;
      inter += (p && g);
      uni += (p || g);
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace rmae
