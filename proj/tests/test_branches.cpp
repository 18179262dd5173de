#include <cmath>
#include <numeric>

#include "doctest.h"
#include "rmae/mae.hpp"
#include "rmae/rae.hpp"
#include "test_util.hpp"

using namespace rmae;
using rmae_test::max_abs_diff;
using rmae_test::random_tensor;

namespace {

ModelConfig small_config(RaeVariant v, int k = 3) {
  ModelConfig c;
  c.image_size = 16;
  c.patch = 4;
  c.mlp_ratio = 2;
  c.pixel.enc_dim = 16;
  c.pixel.enc_depth = 1;
  c.pixel.enc_heads = 2;
  c.pixel.dec_dim = 8;
  c.pixel.dec_depth = 1;
  c.pixel.dec_heads = 2;
  c.region.variant = v;
  c.region.p_e = 16;
  c.region.p_d = 16;
  c.region.heads = 2;
  c.region.head_hidden = 8;
  c.region.k = k;
  return c;
}

RegionBatch random_batch(int k, int n, int pp, Rng& rng) {
  RegionBatch b;
  b.k = k;
  b.n = n;
  b.patch_area = pp;
  b.indices.resize(k);
  std::iota(b.indices.begin(), b.indices.end(), 0);
  b.patches.resize(static_cast<std::size_t>(k) * n * pp);
  for (auto& v : b.patches) v = rng.uniform() < 0.4 ? 1 : 0;
  return b;
}

RegionBatch permute(const RegionBatch& b, const std::vector<int>& perm) {
  RegionBatch out = b;
  const std::size_t per = static_cast<std::size_t>(b.n) * b.patch_area;
  for (int r = 0; r < b.k; ++r) {
    out.indices[r] = b.indices[perm[r]];
    std::copy_n(b.patches.begin() + perm[r] * per, per, out.patches.begin() + r * per);
  }
  return out;
}

std::vector<float> random_patches(const ModelConfig& c, Rng& rng) {
  std::vector<float> p(static_cast<std::size_t>(c.num_patches()) * c.pixel_patch_len());
  for (auto& v : p) v = static_cast<float>(rng.uniform());
  return p;
}

// Plain dense helpers for the hand computation.
using Vec = std::vector<double>;

Vec values(const Tensor& t) { return Vec(t.data().begin(), t.data().end()); }

Vec linear(const Vec& x, const Tensor& w, const Tensor& b) {
  const int in = w.dim(0), out = w.dim(1);
  Vec y(out, 0.0);
  for (int j = 0; j < out; ++j) {
    double s = b.defined() ? b[j] : 0.0;
    for (int i = 0; i < in; ++i) s += x[i] * w[i * out + j];
    y[j] = s;
  }
  return y;
}

Vec linear(const Vec& x, const ParamSet& ps, const std::string& name) {
  return linear(x, ps.find(name + ".weight"), ps.find(name + ".bias"));
}

Vec layernorm(const Vec& x, const ParamSet& ps, const std::string& name) {
  double mu = 0, var = 0;
  for (double v : x) mu += v;
  mu /= x.size();
  for (double v : x) var += (v - mu) * (v - mu);
  var /= x.size();
  const Tensor g = ps.find(name + ".weight"), b = ps.find(name + ".bias");
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mu) / std::sqrt(var + 1e-6) * g[i] + b[i];
  return y;
}

Vec gelu(Vec x) {
  for (double& v : x) v = 0.5 * v * (1 + std::erf(v / std::sqrt(2.0)));
  return x;
}

Vec plus(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

// A pre-norm block on a single token: attention over one key returns its value.
Vec single_token_block(const Vec& x, const ParamSet& ps, const std::string& name) {
  const Vec a = linear(linear(layernorm(x, ps, name + ".norm1"), ps, name + ".attn.v"), ps,
                       name + ".attn.proj");
  const Vec x1 = plus(x, a);
  const Vec m = linear(gelu(linear(layernorm(x1, ps, name + ".norm2"), ps, name + ".mlp.fc1")), ps,
                       name + ".mlp.fc2");
  return plus(x1, m);
}

}  // namespace

TEST_CASE("pixel encoder sees only visible tokens") {
  Rng rng(1);
  ModelConfig c = small_config(RaeVariant::length);
  ParamSet ps(1);
  PixelEncoder enc(ps, c);
  const auto patches = random_patches(c, rng);
  const Tensor pt = constant({c.num_patches(), c.pixel_patch_len()}, patches);
  CHECK(enc(pt, all_visible(16)).shape() == Shape{16, 16});
  CHECK(enc(pt, sample_mask(16, 0.75, rng)).shape() == Shape{4, 16});
  std::vector<Scalar> attn;
  enc(pt, sample_mask(16, 0.75, rng), &attn);
  CHECK(attn.size() == 2u * 4 * 4);
}

TEST_CASE("pixel encoder output for a visible patch ignores masked contents") {
  Rng rng(2);
  ModelConfig c = small_config(RaeVariant::length);
  ParamSet ps(2);
  PixelEncoder enc(ps, c);
  auto patches = random_patches(c, rng);
  const MaskPattern m = sample_mask(16, 0.75, rng);
  const auto a = enc(constant({16, 48}, patches), m).values();
  for (int i : m.masked_indices())
    for (int j = 0; j < 48; ++j) patches[i * 48 + j] = static_cast<float>(rng.uniform());
  CHECK(enc(constant({16, 48}, patches), m).values() == a);
}

TEST_CASE("pixel decoder shape and zero head") {
  Rng rng(3);
  ModelConfig c = small_config(RaeVariant::length);
  ParamSet ps(3);
  PixelEncoder enc(ps, c);
  PixelDecoder dec(ps, c);
  const MaskPattern m = sample_mask(16, 0.75, rng);
  const Tensor vis = enc(constant({16, 48}, random_patches(c, rng)), m);
  CHECK(dec(vis, m).shape() == Shape{16, 48});
  for (auto& v : dec.head.weight.data()) v = 0;
  for (Scalar v : dec(vis, m).values()) CHECK(v == 0);
}

TEST_CASE("pixel loss") {
  Rng rng(4);
  ModelConfig c = small_config(RaeVariant::length);
  auto patches = random_patches(c, rng);
  // Patch 0 is constant: its normalized target must stay finite.
  std::fill_n(patches.begin(), 48, 0.5f);
  const auto target = pixel_targets(patches, 48, true);
  for (Scalar t : target) CHECK(std::isfinite(t));
  for (int j = 0; j < 48; ++j) CHECK(target[j] == 0);

  // Per-patch normalization: zero mean and (almost) unit population std.
  double mu = 0, var = 0;
  for (int j = 48; j < 96; ++j) mu += target[j];
  mu /= 48;
  for (int j = 48; j < 96; ++j) var += (target[j] - mu) * (target[j] - mu);
  CHECK(mu == doctest::Approx(0).scale(1));
  CHECK(std::sqrt(var / 48) == doctest::Approx(1).epsilon(1e-4));

  const MaskPattern m = sample_mask(16, 0.75, rng);
  Tensor exact = Tensor::from({16, 48}, target);
  CHECK(pixel_loss(exact, target, m).item() == 0);

  Tensor pred = random_tensor({16, 48}, rng);
  const Scalar base = pixel_loss(pred, target, m).item();
  auto moved = pred.values();
  for (int i : m.visible_indices())
    for (int j = 0; j < 48; ++j) moved[i * 48 + j] += 10;
  CHECK(pixel_loss(Tensor::from({16, 48}, moved), target, m).item() == base);

  // Mean over masked patch scalars.
  double ref = 0;
  for (int i : m.masked_indices())
    for (int j = 0; j < 48; ++j) ref += std::pow(pred[i * 48 + j] - target[i * 48 + j], 2);
  ref /= m.num_masked() * 48.0;
  CHECK(base == doctest::Approx(ref).epsilon(1e-5));
  CHECK(pixel_loss(pred, target, all_visible(16)).item() == 0);
}

TEST_CASE("region loss") {
  Rng rng(5);
  const RegionBatch b = random_batch(2, 16, 16, rng);
  const MaskPattern m = sample_mask(16, 0.75, rng);
  CHECK(region_loss(Tensor::zeros({2, 16, 16}), b, m).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-6));
  std::vector<Scalar> sat(b.patches.size());
  for (std::size_t i = 0; i < sat.size(); ++i) sat[i] = b.patches[i] ? 20 : -20;
  CHECK(region_loss(Tensor::from({2, 16, 16}, sat), b, m).item() < 1e-6);

  Tensor logits = random_tensor({2, 16, 16}, rng);
  const Scalar base = region_loss(logits, b, m).item();
  auto moved = logits.values();
  for (int r = 0; r < 2; ++r)
    for (int i : m.visible_indices())
      for (int j = 0; j < 16; ++j) moved[(r * 16 + i) * 16 + j] = 50;
  CHECK(region_loss(Tensor::from({2, 16, 16}, moved), b, m).item() == base);
  CHECK(region_loss(Tensor::from({2, 16, 16}, moved), b, m, false).item() != base);
  CHECK_THROWS_AS(region_loss(Tensor::zeros({3, 16, 16}), b, m), ShapeError);
}

TEST_CASE("a constant predictor at the foreground prior stays below ln 2") {
  Rng rng(6);
  RegionBatch b = random_batch(4, 16, 16, rng);
  double prior = 0;
  for (auto v : b.patches) prior += v;
  prior /= b.patches.size();
  ModelConfig c = small_config(RaeVariant::length, 4);
  ParamSet ps(6);
  RegionBranch br(ps, c);
  br.init_bias(prior);
  const std::string name = "reg.head.fc3";
  for (auto& w : ps.find(name + ".weight").data()) w = 0;
  const MaskPattern m = sample_mask(16, 0.75, rng);
  const Tensor ctx = random_tensor({16, 16}, rng);
  const Tensor logits = br(b, m, ctx).logits;
  for (Scalar v : logits.values()) CHECK(v == doctest::Approx(std::log(prior / (1 - prior))));
  CHECK(region_loss(logits, b, all_visible(16), false).item() <= std::log(2.0));
}

TEST_CASE("batch and length variants are equivariant to region order") {
  Rng rng(7);
  for (RaeVariant v : {RaeVariant::batch, RaeVariant::length}) {
    ModelConfig c = small_config(v, 4);
    ParamSet ps(7);
    RegionBranch br(ps, c);
    for (int trial = 0; trial < 5; ++trial) {
      const RegionBatch b = random_batch(4, 16, 16, rng);
      const MaskPattern m = sample_mask(16, 0.5, rng);
      const Tensor ctx = random_tensor({16, 16}, rng);
      std::vector<int> perm{0, 1, 2, 3};
      rng.shuffle(perm);
      const Tensor a = gather(br(b, m, ctx).logits, 0, perm);
      const Tensor p = br(permute(b, perm), m, ctx).logits;
      INFO(to_string(v));
      CHECK(max_abs_diff(a.values(), p.values()) < 1e-5);
    }
  }
}

TEST_CASE("the channel variant depends on region order") {
  Rng rng(8);
  ModelConfig c = small_config(RaeVariant::channel, 3);
  ParamSet ps(8);
  RegionBranch br(ps, c);
  const RegionBatch b = random_batch(3, 16, 16, rng);
  const MaskPattern m = sample_mask(16, 0.5, rng);
  const Tensor ctx = random_tensor({16, 16}, rng);
  const std::vector<int> perm{2, 0, 1};
  const Tensor out = br(b, m, ctx).logits;
  CHECK(out.shape() == Shape{3, 16, 16});
  const Tensor p = br(permute(b, perm), m, ctx).logits;
  CHECK(p.shape() == Shape{3, 16, 16});
  CHECK(max_abs_diff(gather(out, 0, perm).values(), p.values()) > 1e-3);
  CHECK_THROWS_AS(br(random_batch(2, 16, 16, rng), m, ctx), ShapeError);
}

TEST_CASE("length variant with one region matches a hand computation") {
  Rng rng(9);
  ModelConfig c = small_config(RaeVariant::length, 1);
  c.image_size = 8;  // N = 4
  c.region.p_e = 8;
  c.region.p_d = 8;
  ParamSet ps(9);
  RegionBranch br(ps, c);
  for (Tensor t : ps.tensors())
    for (auto& v : t.data()) v += static_cast<Scalar>(0.1 * rng.normal());
  const RegionBatch b = random_batch(1, 4, 16, rng);
  const MaskPattern m = mask_from_visible(4, {2});
  const Tensor ctx = random_tensor({4, 8}, rng);
  const Tensor got = br(b, m, ctx).logits;
  REQUIRE(got.shape() == Shape{1, 4, 16});

  // Encoder over the single visible token; the mean of one token is itself.
  Vec tok(16);
  for (int j = 0; j < 16; ++j) tok[j] = b.at(0, 2, j);
  const Tensor pos = sincos_pos_embed_2d(2, 2, 8);
  Vec x = linear(tok, ps, "reg.embed");
  for (int j = 0; j < 8; ++j) x[j] += pos[2 * 8 + j];
  x = layernorm(single_token_block(x, ps, "reg.enc0"), ps, "reg.enc_norm");
  Vec q = linear(x, ps, "reg.f");
  // Self-attention over one query, then spatial expansion onto the context.
  q = plus(q, linear(linear(layernorm(q, ps, "reg.dec0.norm1"), ps, "reg.dec0.self_attn.v"), ps,
                     "reg.dec0.self_attn.proj"));
  const Vec qn = layernorm(q, ps, "reg.dec0.norm2");
  const Tensor w = ps.find("reg.dec0.expand");
  for (int n = 0; n < 4; ++n) {
    Vec row(ctx.data().begin() + n * 8, ctx.data().begin() + (n + 1) * 8);
    Vec e = plus(linear(row, w, Tensor()), qn);
    Vec h = gelu(linear(e, ps, "reg.head.fc1"));
    h = gelu(linear(h, ps, "reg.head.fc2"));
    const Vec out = linear(h, ps, "reg.head.fc3");
    for (int j = 0; j < 16; ++j) CHECK(got[n * 16 + j] == doctest::Approx(out[j]).epsilon(1e-4));
  }
}

TEST_CASE("region branch requires a visible patch and matching geometry") {
  Rng rng(10);
  ModelConfig c = small_config(RaeVariant::batch, 2);
  ParamSet ps(10);
  RegionBranch br(ps, c);
  const Tensor ctx = random_tensor({16, 16}, rng);
  CHECK_THROWS_AS(br(random_batch(2, 16, 16, rng), mask_from_visible(16, {}), ctx), ShapeError);
  CHECK_THROWS_AS(br(random_batch(2, 9, 16, rng), all_visible(9), ctx), ShapeError);
}

TEST_CASE("neck produces a context for every patch") {
  Rng rng(11);
  ModelConfig c = small_config(RaeVariant::length);
  ParamSet ps(11);
  Neck neck(ps, c);
  const MaskPattern m = sample_mask(16, 0.75, rng);
  const Tensor vis = random_tensor({4, 16}, rng);
  CHECK(neck(&vis, m).shape() == Shape{16, 16});
  CHECK(neck(nullptr, m).shape() == Shape{16, 16});
}
