#include "rmae/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rmae {

int MaskPattern::num_masked() const {
  return static_cast<int>(std::count(masked.begin(), masked.end(), std::uint8_t{1}));
}

std::vector<int> MaskPattern::visible_indices() const {
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (!is_masked(i)) out.push_back(i);
  return out;
}

std::vector<int> MaskPattern::masked_indices() const {
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (is_masked(i)) out.push_back(i);
  return out;
}

int masked_count(int n, double beta) {
  return static_cast<int>(std::floor(static_cast<double>(n) * beta + 0.5 + 1e-9));
}

MaskPattern all_visible(int n) {
  MaskPattern m;
  m.n = n;
  m.masked.assign(static_cast<std::size_t>(n), 0);
  return m;
}

MaskPattern mask_from_visible(int n, const std::vector<int>& visible) {
  MaskPattern m;
  m.n = n;
  m.masked.assign(static_cast<std::size_t>(n), 1);
  for (int v : visible) {
    if (v < 0 || v >= n) throw std::out_of_range("visible patch index out of range");
    m.masked[static_cast<std::size_t>(v)] = 0;
  }
  m.ratio = static_cast<double>(m.num_masked()) / n;
  return m;
}

namespace {

MaskPattern mask_from_order(const std::vector<int>& order, double beta) {
  const int n = static_cast<int>(order.size());
  const int count = masked_count(n, beta);
  if (count >= n) {
    throw std::invalid_argument("mask ratio " + std::to_string(beta) + " hides all " +
                                std::to_string(n) + " patches");
  }
  MaskPattern m;
  m.n = n;
  m.ratio = beta;
  m.masked.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < count; ++i) m.masked[static_cast<std::size_t>(order[i])] = 1;
  return m;
}

std::vector<int> random_order(int n, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  return order;
}

}  // namespace

MaskPattern sample_mask(int n, double beta, Rng& rng) {
  if (n <= 0) throw std::invalid_argument("sample_mask: n must be positive");
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::invalid_argument("sample_mask: ratio must be in [0, 1)");
  }
  return mask_from_order(random_order(n, rng), beta);
}

MaskPattern shared_mask(const MaskPattern& image_mask) { return image_mask; }

MaskPattern region_mask_for(const MaskPattern& image_mask, double beta_r, MaskSharing sharing,
                            Rng& rng) {
  if (sharing == MaskSharing::independent) return sample_mask(image_mask.n, beta_r, rng);
  const int target = masked_count(image_mask.n, beta_r);
  if (target >= image_mask.n) {
    throw std::invalid_argument("region mask ratio hides every patch");
  }
  const int current = image_mask.num_masked();
  if (target == current) {
    MaskPattern m = shared_mask(image_mask);
    m.ratio = beta_r;
    return m;
  }
  MaskPattern m = image_mask;
  m.ratio = beta_r;
  if (target > current) {
    auto vis = image_mask.visible_indices();
    rng.shuffle(vis);
    for (int i = 0; i < target - current; ++i) m.masked[static_cast<std::size_t>(vis[i])] = 1;
  } else {
    auto hid = image_mask.masked_indices();
    rng.shuffle(hid);
    for (int i = 0; i < current - target; ++i) m.masked[static_cast<std::size_t>(hid[i])] = 0;
  }
  return m;
}

std::vector<MaskPattern> nested_masks(int n, const std::vector<double>& betas, Rng& rng) {
  const auto order = random_order(n, rng);
  std::vector<MaskPattern> out;
  out.reserve(betas.size());
  for (double b : betas) out.push_back(mask_from_order(order, b));
  return out;
}

bool RegionBatch::foreground_patch(int r, int i) const {
  const std::uint8_t* p =
      patches.data() + (static_cast<std::size_t>(r) * n + i) * patch_area;
  return std::any_of(p, p + patch_area, [](std::uint8_t v) { return v != 0; });
}

std::vector<std::uint8_t> patchify_region(const RegionMap& map, int width, int height, int p) {
  if (p <= 0 || width % p != 0 || height % p != 0) {
    throw std::invalid_argument("patchify_region: " + std::to_string(width) + "x" +
                                std::to_string(height) + " not divisible by " + std::to_string(p));
  }
  const int gw = width / p, gh = height / p;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height);
  std::size_t o = 0;
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx)
      for (int py = 0; py < p; ++py)
        for (int px = 0; px < p; ++px)
          out[o++] = map[static_cast<std::size_t>(gy * p + py) * width + gx * p + px];
  return out;
}

RegionBatch make_region_batch(const RegionSet& rs, const std::vector<int>& indices, int p) {
  RegionBatch b;
  b.k = static_cast<int>(indices.size());
  b.n = (rs.width / p) * (rs.height / p);
  b.patch_area = p * p;
  b.indices = indices;
  b.patches.reserve(static_cast<std::size_t>(b.k) * rs.width * rs.height);
  for (int id : indices) {
    if (id < 0 || id >= static_cast<int>(rs.size())) {
      throw std::out_of_range("region index " + std::to_string(id) + " out of range");
    }
    auto pr = patchify_region(rs.maps[static_cast<std::size_t>(id)], rs.width, rs.height, p);
    b.patches.insert(b.patches.end(), pr.begin(), pr.end());
  }
  return b;
}

RegionBatch sample_regions(const RegionSet& rs, const MaskPattern& mask, int k, int p, Rng& rng) {
  if (rs.empty()) throw std::invalid_argument("sample_regions: empty region set");
  const auto all = make_region_batch(
      rs, [&] {
        std::vector<int> ids(rs.size());
        std::iota(ids.begin(), ids.end(), 0);
        return ids;
      }(),
      p);
  if (all.n != mask.n) {
    throw std::invalid_argument("sample_regions: mask covers " + std::to_string(mask.n) +
                                " patches, regions have " + std::to_string(all.n));
  }
  std::vector<int> pool;
  for (int r = 0; r < all.k; ++r) {
    for (int i = 0; i < all.n; ++i) {
      if (!mask.is_masked(i) && all.foreground_patch(r, i)) {
        pool.push_back(r);
        break;
      }
    }
  }
  if (pool.empty()) throw EmptyRegionPool();
  std::vector<int> chosen(static_cast<std::size_t>(k));
  for (auto& c : chosen) c = pool[rng.below(static_cast<std::uint64_t>(pool.size()))];
  return make_region_batch(rs, chosen, p);
}

MaskedRegions sample_masked_regions(const RegionSet& rs, int n, double beta_i, double beta_r,
                                    MaskSharing sharing, int k, int p, Rng& rng,
                                    int max_resamples) {
  MaskedRegions out;
  for (int attempt = 0; attempt <= max_resamples; ++attempt) {
    out.image_mask = sample_mask(n, beta_i, rng);
    out.region_mask = region_mask_for(out.image_mask, beta_r, sharing, rng);
    out.mask_attempts = attempt + 1;
    try {
      out.batch = sample_regions(rs, out.region_mask, k, p, rng);
      return out;
    } catch (const EmptyRegionPool&) {
    }
  }
  std::vector<int> chosen(static_cast<std::size_t>(k));
  for (auto& c : chosen) c = static_cast<int>(rng.below(static_cast<std::uint64_t>(rs.size())));
  out.batch = make_region_batch(rs, chosen, p);
  out.fell_back = true;
  return out;
}

}  // namespace rmae
