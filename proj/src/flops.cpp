#include "rmae/flops.hpp"

#include <iomanip>
#include <sstream>

namespace rmae {

namespace macs {

std::uint64_t linear(std::uint64_t rows, std::uint64_t in, std::uint64_t out) {
  return rows * in * out;
}

// q projection on the queries, k and v on the context, logits, weighted sum,
// output projection.
std::uint64_t attention(std::uint64_t lq, std::uint64_t lk, std::uint64_t dim) {
  return linear(lq, dim, dim) + 2 * linear(lk, dim, dim) + 2 * lq * lk * dim +
         linear(lq, dim, dim);
}

std::uint64_t mlp(std::uint64_t rows, std::uint64_t dim, std::uint64_t ratio) {
  return linear(rows, dim, dim * ratio) + linear(rows, dim * ratio, dim);
}

std::uint64_t self_block(std::uint64_t len, std::uint64_t dim, std::uint64_t ratio) {
  return attention(len, len, dim) + mlp(len, dim, ratio);
}

std::uint64_t cross_block(std::uint64_t lq, std::uint64_t lk, std::uint64_t dim,
                          std::uint64_t ratio) {
  return attention(lq, lq, dim) + attention(lq, lk, dim) + mlp(lq, dim, ratio);
}

std::uint64_t mlp_head(std::uint64_t rows, std::uint64_t in, std::uint64_t hidden,
                       std::uint64_t out) {
  return linear(rows, in, hidden) + linear(rows, hidden, hidden) + linear(rows, hidden, out);
}

}  // namespace macs

std::uint64_t FlopsReport::total() const {
  std::uint64_t t = 0;
  for (const auto& [name, v] : components) t += v;
  return t;
}

std::uint64_t FlopsReport::get(const std::string& name) const {
  for (const auto& [n, v] : components)
    if (n == name) return v;
  return 0;
}

std::uint64_t FlopsReport::region_branch() const {
  return get("region_encoder") + get("neck") + get("region_decoder") + get("region_head") +
         get("cross_feed");
}

nlohmann::json FlopsReport::to_json() const {
  nlohmann::json comps = nlohmann::json::object();
  for (const auto& [n, v] : components) comps[n] = v;
  const auto t = total();
  return {{"components", comps},
          {"total", t},
          {"total_g", static_cast<double>(t) / 1e9},
          {"region_branch", region_branch()}};
}

std::string FlopsReport::table() const {
  std::ostringstream os;
  auto row = [&](const std::string& name, std::uint64_t v) {
    os << std::left << std::setw(16) << name << std::right << std::setw(16) << v << std::setw(10)
       << std::fixed << std::setprecision(3) << static_cast<double>(v) / 1e9 << "b\n";
  };
  for (const auto& [n, v] : components) row(n, v);
  os << std::string(43, '-') << '\n';
  row("total", total());
  return os.str();
}

FlopsReport flops_estimate(const ModelConfig& cfg) {
  using std::uint64_t;
  const uint64_t n = static_cast<uint64_t>(cfg.num_patches());
  const uint64_t pp = static_cast<uint64_t>(cfg.patch_area());
  const uint64_t ratio = static_cast<uint64_t>(cfg.mlp_ratio);
  const auto& px = cfg.pixel;
  const uint64_t e = px.enc_dim, d = px.dec_dim;
  const uint64_t lv_i = n - static_cast<uint64_t>(masked_count(cfg.num_patches(), px.beta_i));

  FlopsReport r;
  // Every patch is embedded before the visible rows are kept.
  r.components.emplace_back(
      "pixel_encoder", macs::linear(n, static_cast<uint64_t>(cfg.pixel_patch_len()), e) +
                           px.enc_depth * macs::self_block(lv_i, e, ratio));
  const bool pixel = has_pixel_branch(cfg.cross_feed);
  r.components.emplace_back("pixel_decoder", pixel ? macs::linear(lv_i, e, d) +
                                                         px.dec_depth * macs::self_block(n, d, ratio)
                                                   : 0);
  r.components.emplace_back(
      "pixel_head", pixel ? macs::linear(n, d, static_cast<uint64_t>(cfg.pixel_patch_len())) : 0);

  const auto& rc = cfg.region;
  const uint64_t k = rc.k > 0 ? static_cast<uint64_t>(rc.k) : 0;
  uint64_t enc = 0, neck = 0, dec = 0, head = 0, feed = 0;
  if (has_region_branch(cfg.cross_feed) && k > 0) {
    const uint64_t pe = rc.p_e, pd = rc.p_d, hh = rc.head_hidden;
    const uint64_t lv_r = n - static_cast<uint64_t>(masked_count(cfg.num_patches(), rc.beta_r));
    neck = macs::linear(n, e, pd) + rc.neck_depth * macs::self_block(n, pd, ratio);
    const uint64_t enc_one = rc.enc_depth * macs::self_block(lv_r, pe, ratio);
    switch (rc.variant) {
      case RaeVariant::channel:
        enc = macs::linear(lv_r, k * pp, pe) + enc_one;
        dec = macs::linear(lv_r, pe, pd) + rc.dec_depth * macs::self_block(n, pd, ratio);
        head = macs::mlp_head(n, pd, hh, k * pp);
        break;
      case RaeVariant::batch:
        enc = k * (macs::linear(lv_r, pp, pe) + enc_one);
        dec = k * (macs::linear(lv_r, pe, pd) + rc.dec_depth * macs::self_block(n, pd, ratio));
        head = k * macs::mlp_head(n, pd, hh, pp);
        break;
      case RaeVariant::length:
        enc = k * (macs::linear(lv_r, pp, pe) + enc_one);
        dec = macs::linear(k, pe, pd) +
              (rc.dec_depth - 1) * macs::cross_block(k, n, pd, ratio) +
              macs::attention(k, k, pd) + macs::linear(n, pd, pd);
        head = k * macs::mlp_head(n, pd, hh, pp);
        break;
    }
    if (regions_feed_pixels(cfg.cross_feed)) {
      const uint64_t slices = rc.variant == RaeVariant::channel ? 1 : k;
      feed = slices * macs::linear(lv_r, pe, d);
    }
  }
  r.components.emplace_back("region_encoder", enc);
  r.components.emplace_back("neck", neck);
  r.components.emplace_back("region_decoder", dec);
  r.components.emplace_back("region_head", head);
  r.components.emplace_back("cross_feed", feed);
  return r;
}

}  // namespace rmae
