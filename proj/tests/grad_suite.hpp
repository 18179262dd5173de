#pragma once

// Randomized finite-difference checks over every block and the full model.
// Include only from translation units built against the f64 library.

#include <string>
#include <utility>
#include <vector>

#include "rmae/grad_check.hpp"
#include "rmae/mae.hpp"
#include "rmae/model.hpp"
#include "rmae/rae.hpp"
#include "test_util.hpp"

namespace rmae_test::inline RMAE_ABI {

using GradErrors = std::vector<std::pair<std::string, double>>;

constexpr rmae::FdScheme kFd = rmae::FdScheme::richardson;

// Random weighted sum so that no output coordinate cancels by symmetry.
inline rmae::Tensor probe(const rmae::Tensor& y, std::uint64_t seed) {
  rmae::Rng rng(seed);
  std::vector<rmae::Scalar> w(y.numel());
  for (auto& v : w) v = static_cast<rmae::Scalar>(rng.uniform(-1.0, 1.0));
  return rmae::weighted_sum(y, w);
}

// Two-layer random region set on an s x s image: a rectangle and its
// complement, plus one random blob.
inline rmae::RegionSet random_regions(int s, rmae::Rng& rng) {
  rmae::LabelMap a{s, s, 2, std::vector<int>(static_cast<std::size_t>(s) * s, 0)};
  const int x0 = rng.below(s / 2), y0 = rng.below(s / 2);
  for (int y = y0; y < y0 + s / 2; ++y)
    for (int x = x0; x < x0 + s / 2; ++x) a.labels[y * s + x] = 1;
  rmae::LabelMap b{s, s, 2, std::vector<int>(static_cast<std::size_t>(s) * s, 0)};
  for (int& l : b.labels) l = rng.uniform() < 0.3 ? 1 : 0;
  b = rmae::relabel_contiguous(s, s, b.labels);
  return rmae::region_set_from_layers({a, b}, rmae::RegionSource::external, {}, 1);
}

inline rmae::ModelConfig toy_config(rmae::RaeVariant variant, rmae::CrossFeed mode,
                                    rmae::Rng& rng) {
  rmae::ModelConfig c;
  c.image_size = 8;
  c.patch = 4;
  c.mlp_ratio = 2;
  c.pixel.enc_dim = 8;
  c.pixel.enc_depth = 1;
  c.pixel.enc_heads = 2;
  c.pixel.dec_dim = 8;
  c.pixel.dec_depth = 1;
  c.pixel.dec_heads = 2;
  c.pixel.beta_i = rng.uniform() < 0.5 ? 0.25 : 0.5;
  c.pixel.norm_pix = rng.uniform() < 0.5;
  c.region.variant = variant;
  c.region.p_e = 8;
  c.region.p_d = 8;
  c.region.heads = 2;
  c.region.head_hidden = 8;
  c.region.k = 2;
  c.region.beta_r = c.pixel.beta_i;
  c.cross_feed = mode;
  return c;
}

inline std::vector<float> random_patches(const rmae::ModelConfig& c, rmae::Rng& rng) {
  std::vector<float> p(static_cast<std::size_t>(c.num_patches()) * c.pixel_patch_len());
  for (auto& v : p) v = static_cast<float>(rng.uniform());
  return p;
}

// One randomized trial; returns the grad_check error per component.
inline GradErrors grad_trial(std::uint64_t seed, rmae::Scalar h = rmae::Scalar(5e-3)) {
  using namespace rmae;
  Rng rng(seed);
  GradErrors out;
  const int heads = 1 + rng.below(2);
  const int dim = heads * 4 * (1 + rng.below(2));  // <= 16
  const int len = 1 + rng.below(5);
  const int ctx_len = 1 + rng.below(5);
  const std::uint64_t ps_seed = rng.next_u64();

  {
    ParamSet ps(ps_seed);
    Linear lin(ps, "lin", dim, 3);
    LayerNorm ln(ps, "ln", dim);
    Mlp mlp(ps, "mlp", dim, 2 * dim);
    Attention attn(ps, "attn", dim, heads);
    SelfAttnBlock sa(ps, "sa", dim, heads, 2);
    CrossAttnBlock ca(ps, "ca", dim, heads, 2);
    MlpHead head(ps, "head", dim, 6, 5);
    // Norm parameters start at exactly 1/0; perturb so their grads are generic.
    for (Tensor t : ps.tensors())
      for (auto& v : t.data()) v += static_cast<Scalar>(0.1 * rng.normal());
    Tensor x = random_tensor({len, dim}, rng, 1.0, true);
    Tensor ctx = random_tensor({ctx_len, dim}, rng, 1.0, true);
    Tensor w = random_tensor({dim, dim}, rng, 0.5, true);
    auto leaves = [&](std::initializer_list<Tensor> ts, std::vector<Tensor> extra = {}) {
      std::vector<Tensor> l(ts);
      l.insert(l.end(), extra.begin(), extra.end());
      return l;
    };
    const std::uint64_t s = rng.next_u64();
    out.emplace_back("linear", grad_check([&] { return probe(lin(x), s); },
                                          leaves({x, lin.weight, lin.bias}), h, kFd));
    out.emplace_back("layernorm", grad_check([&] { return probe(ln(x), s); },
                                             leaves({x, ln.gamma, ln.beta}), h, kFd));
    out.emplace_back("mlp", grad_check([&] { return probe(mlp(x), s); },
                                       leaves({x, mlp.fc1.weight, mlp.fc1.bias, mlp.fc2.weight}),
                                       h, kFd));
    out.emplace_back("attention",
                     grad_check([&] { return probe(attn(x, ctx), s); },
                                leaves({x, ctx, attn.q.weight, attn.k.weight, attn.v.weight,
                                        attn.out.weight, attn.out.bias}),
                                h, kFd));
    std::vector<Tensor> sa_params, ca_params, head_params;
    for (const Tensor& t : ps.tensors()) {
      if (t.name().rfind("sa.", 0) == 0) sa_params.push_back(t);
      if (t.name().rfind("ca.", 0) == 0) ca_params.push_back(t);
      if (t.name().rfind("head.", 0) == 0) head_params.push_back(t);
    }
    out.emplace_back("self_attn_block",
                     grad_check([&] { return probe(sa(x), s); }, leaves({x}, sa_params), h, kFd));
    out.emplace_back("cross_attn_block", grad_check([&] { return probe(ca(x, ctx), s); },
                                                    leaves({x, ctx}, ca_params), h, kFd));
    out.emplace_back("mlp_head",
                     grad_check([&] { return probe(head(x), s); }, leaves({x}, head_params), h, kFd));
    out.emplace_back("expanded_cross_attn",
                     grad_check([&] { return probe(expanded_cross_attn(x, ctx, w), s); },
                                leaves({x, ctx, w}), h, kFd));
    const int n = len + 1 + rng.below(3);
    std::vector<int> vis;
    for (int i = 0; i < n && static_cast<int>(vis.size()) < len; ++i)
      if (rng.uniform() < 0.7 || n - i <= len - static_cast<int>(vis.size())) vis.push_back(i);
    const MaskPattern m = mask_from_visible(n, vis);
    Tensor token = random_tensor({dim}, rng, 1.0, true);
    Tensor pos = random_tensor({n, dim}, rng);
    out.emplace_back("mask_fill", grad_check([&] { return probe(mask_fill(x, m, token, pos), s); },
                                             leaves({x, token}), h, kFd));
  }

  // Branch-level and full-model checks on the 8x8, p=4, k=2 toy.
  const RaeVariant variants[] = {RaeVariant::channel, RaeVariant::batch, RaeVariant::length};
  const CrossFeed modes[] = {CrossFeed::pix_to_reg, CrossFeed::reg_to_pix,
                             CrossFeed::bidirectional, CrossFeed::rae_only, CrossFeed::mae_only};
  const RaeVariant variant = variants[rng.below(3)];
  const CrossFeed mode = modes[rng.below(5)];
  const ModelConfig cfg = toy_config(variant, mode, rng);
  RMaeModel model(cfg, rng.next_u64());
  for (Tensor t : model.params().tensors())
    for (auto& v : t.data()) v += static_cast<Scalar>(0.1 * rng.normal());
  const auto patches = random_patches(cfg, rng);
  const RegionSet rs = random_regions(cfg.image_size, rng);
  const MaskedRegions mr = sample_masked_regions(rs, cfg.num_patches(), cfg.pixel.beta_i,
                                                 cfg.region.beta_r, cfg.region.sharing,
                                                 cfg.region.k, cfg.patch, rng);
  const std::string tag = "rmae_forward[" + to_string(variant) + "," + to_string(mode) + "]";
  const Scalar full = grad_check(
      [&] {
        return model.forward(patches, mr.image_mask, &mr.batch, mr.region_mask).total;
      },
      model.params().tensors(), h, kFd);
  out.emplace_back(tag, full);
  return out;
}

}  // namespace rmae_test::inline RMAE_ABI
