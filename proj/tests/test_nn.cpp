#include <cmath>
#include <numeric>

#include "doctest.h"
#include "rmae/image.hpp"
#include "rmae/mae.hpp"
#include "rmae/nn.hpp"
#include "test_util.hpp"

using namespace rmae;
using rmae_test::max_abs_diff;
using rmae_test::random_tensor;

namespace {

std::vector<int> random_perm(int n, Rng& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(p);
  return p;
}

void zero_out(Tensor t) {
  for (auto& v : t.data()) v = 0;
}

}  // namespace

TEST_CASE("patch counts follow the image geometry") {
  CHECK(patchify(Image(32, 32), 4).size() == 64u * 48u);
  CHECK(patchify(Image(224, 224), 16).size() == 196u * 768u);
  CHECK_THROWS(patchify(Image(30, 32), 4));
}

TEST_CASE("patch embedding of a zero image with zero bias is zero") {
  ParamSet ps(1);
  PatchEmbed pe(ps, "pe", 4, 3, 16);
  const auto patches = patchify(Image(8, 8), 4);
  Tensor out = pe(constant({4, 48}, patches));
  CHECK(out.shape() == Shape{4, 16});
  for (Scalar v : out.values()) CHECK(v == 0);
}

TEST_CASE("patchify orders patches row-major with (row, col, channel) contents") {
  Image img(8, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(100 * y + 10 * x + c);
  const auto p = patchify(img, 4);
  // second patch starts at x = 4
  CHECK(p[48 + 0] == 40);
  CHECK(p[48 + 3 * 1 + 2] == 52);
  CHECK(p[48 + 3 * 4] == 140);
}

TEST_CASE("sincos table") {
  Tensor t = sincos_pos_embed_2d(2, 2, 8);
  REQUIRE(t.shape() == Shape{4, 8});
  // row layout: sin(r w0) sin(r w1) cos(r w0) cos(r w1) sin(c w0) sin(c w1) cos(c w0) cos(c w1)
  // with w0 = 1, w1 = 10000^(-1/2) = 0.01
  const double s1 = std::sin(1.0), c1 = std::cos(1.0), s01 = std::sin(0.01), c01 = std::cos(0.01);
  const double expected[4][8] = {
      {0, 0, 1, 1, 0, 0, 1, 1},
      {0, 0, 1, 1, s1, s01, c1, c01},
      {s1, s01, c1, c01, 0, 0, 1, 1},
      {s1, s01, c1, c01, s1, s01, c1, c01},
  };
  for (int r = 0; r < 4; ++r)
    for (int d = 0; d < 8; ++d) CHECK(t[r * 8 + d] == doctest::Approx(expected[r][d]).epsilon(1e-6));

  Tensor big = sincos_pos_embed_2d(4, 4, 16);
  for (int a = 0; a < 16; ++a)
    for (int b = a + 1; b < 16; ++b) {
      double d = 0;
      for (int j = 0; j < 16; ++j) d += std::abs(big[a * 16 + j] - big[b * 16 + j]);
      CHECK(d > 1e-3);
    }
  CHECK_THROWS(sincos_pos_embed_2d(2, 2, 6));
}

TEST_CASE("self-attention block with one token") {
  Rng rng(3);
  ParamSet ps(3);
  SelfAttnBlock blk(ps, "b", 8, 2);
  Tensor x = random_tensor({1, 8}, rng);
  const Tensor a = blk.attn.out(blk.attn.v(blk.norm1(x)));
  const Tensor x1 = add(x, a);
  const Tensor expected = add(x1, blk.mlp(blk.norm2(x1)));
  CHECK(max_abs_diff(blk(x).values(), expected.values()) < 1e-6);
}

TEST_CASE("blocks are equivariant to row permutations") {
  Rng rng(5);
  ParamSet ps(5);
  SelfAttnBlock sa(ps, "sa", 16, 4);
  CrossAttnBlock ca(ps, "ca", 16, 4);
  MlpHead head(ps, "head", 16, 8, 5);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = random_tensor({7, 16}, rng);
    Tensor ctx = random_tensor({5, 16}, rng);
    const auto p = random_perm(7, rng);
    const auto pc = random_perm(5, rng);
    CHECK(max_abs_diff(sa(gather(x, 0, p)).values(), gather(sa(x), 0, p).values()) < 1e-6);
    CHECK(max_abs_diff(ca(gather(x, 0, p), ctx).values(), gather(ca(x, ctx), 0, p).values()) <
          1e-6);
    CHECK(max_abs_diff(ca(x, gather(ctx, 0, pc)).values(), ca(x, ctx).values()) < 1e-6);
    CHECK(max_abs_diff(head(gather(x, 0, p)).values(), gather(head(x), 0, p).values()) < 1e-6);
  }
}

TEST_CASE("cross-attention over a single context row ignores the logits") {
  Rng rng(8);
  ParamSet ps(8);
  Attention attn(ps, "a", 8, 2);
  Tensor q = random_tensor({3, 8}, rng);
  Tensor ctx = random_tensor({1, 8}, rng);
  const auto before = attn(q, ctx).values();
  for (auto& w : attn.q.weight.data()) w *= -3;
  for (auto& w : attn.k.weight.data()) w *= 2;
  const auto after = attn(q, ctx).values();
  CHECK(max_abs_diff(before, after) < 1e-6);
  // Every query receives the same value row.
  for (int i = 1; i < 3; ++i)
    for (int d = 0; d < 8; ++d) CHECK(after[i * 8 + d] == doctest::Approx(after[d]));
}

TEST_CASE("attention validates widths") {
  ParamSet ps;
  CHECK_THROWS(Attention(ps, "bad", 10, 4));
  Attention ok(ps, "ok", 8, 2);
  CHECK_THROWS_AS(ok(Tensor::zeros({2, 8}), Tensor::zeros({2, 6})), ShapeError);
}

TEST_CASE("attention weights rows sum to one") {
  Rng rng(2);
  ParamSet ps(2);
  Attention attn(ps, "a", 8, 2);
  std::vector<Scalar> w;
  attn(random_tensor({4, 8}, rng), random_tensor({6, 8}, rng), &w);
  REQUIRE(w.size() == 2u * 4 * 6);
  for (int r = 0; r < 8; ++r) {
    double s = 0;
    for (int j = 0; j < 6; ++j) s += w[r * 6 + j];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("expanded cross-attention") {
  Rng rng(4);
  const int k = 3, n = 5, d = 4;
  Tensor q = random_tensor({k, d}, rng), ctx = random_tensor({n, d}, rng);
  Tensor w = random_tensor({d, d}, rng);

  SUBCASE("zero W broadcasts the queries") {
    Tensor out = expanded_cross_attn(q, ctx, Tensor::zeros({d, d}));
    REQUIRE(out.shape() == Shape{k, n, d});
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < d; ++c) CHECK(out[(i * n + j) * d + c] == q[i * d + c]);
  }
  SUBCASE("zero queries give identical slices") {
    Tensor out = expanded_cross_attn(Tensor::zeros({k, d}), ctx, w);
    const auto ref = matmul(ctx, w).values();
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n * d; ++j) CHECK(out[i * n * d + j] == doctest::Approx(ref[j]));
  }
  SUBCASE("swapping two queries swaps the slices exactly") {
    Tensor q2 = random_tensor({2, d}, rng);
    const std::vector<int> swap{1, 0};
    Tensor a = expanded_cross_attn(q2, ctx, w);
    Tensor b = expanded_cross_attn(gather(q2, 0, swap), ctx, w);
    CHECK(gather(a, 0, swap).values() == b.values());
  }
  SUBCASE("affine in the queries") {
    Tensor q1 = random_tensor({k, d}, rng), qb = random_tensor({k, d}, rng);
    const auto s = expanded_cross_attn(add(q1, qb), ctx, w).values();
    const auto a = expanded_cross_attn(q1, ctx, w).values();
    const auto b = expanded_cross_attn(qb, ctx, w).values();
    const auto z = expanded_cross_attn(Tensor::zeros({k, d}), ctx, w).values();
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(s[i] - a[i] - b[i] + z[i]) < 1e-5);
  }
}

TEST_CASE("mask_fill") {
  Rng rng(6);
  const int n = 6, d = 4;
  Tensor token = random_tensor({d}, rng), pos = random_tensor({n, d}, rng);

  SUBCASE("all visible adds positions") {
    Tensor x = random_tensor({n, d}, rng);
    CHECK(max_abs_diff(mask_fill(x, all_visible(n), token, pos).values(), add(x, pos).values()) <
          1e-7);
  }
  SUBCASE("all masked is token plus positions") {
    MaskPattern m = mask_from_visible(n, {});
    Tensor out = mask_fill(Tensor(), m, token, pos);
    REQUIRE(out.shape() == Shape{n, d});
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c)
        CHECK(out[i * d + c] == doctest::Approx(token[c] + pos[i * d + c]));
  }
  SUBCASE("round trip through take_visible") {
    MaskPattern m = mask_from_visible(n, {1, 4, 5});
    Tensor x = random_tensor({3, d}, rng);
    Tensor back = take_visible(mask_fill(x, m, token, pos), m);
    CHECK(max_abs_diff(back.values(), add(x, take_visible(pos, m)).values()) < 1e-7);
  }
  SUBCASE("count mismatch fails") {
    MaskPattern m = mask_from_visible(n, {1, 4});
    CHECK_THROWS_AS(mask_fill(random_tensor({3, d}, rng), m, token, pos), ShapeError);
  }
}

TEST_CASE("mlp head with zero weights gives zero logits") {
  ParamSet ps(1);
  MlpHead head(ps, "h", 8, 16, 4);
  for (Tensor t : ps.tensors()) zero_out(t);
  Rng rng(1);
  for (Scalar v : head(random_tensor({5, 8}, rng)).values()) CHECK(v == 0);
}

TEST_CASE("parameters are registered by name") {
  ParamSet ps(1);
  SelfAttnBlock blk(ps, "enc0", 8, 2);
  CHECK(ps.find("enc0.attn.q.weight").shape() == Shape{8, 8});
  CHECK(ps.find("enc0.mlp.fc1.weight").shape() == Shape{8, 32});
  CHECK(ps.find("enc0.norm2.weight").defined());
  CHECK_THROWS(ps.find("nope"));
  CHECK(ps.scalar_count() == 4 * (64 + 8) + 2 * 2 * 8 + (8 * 32 + 32) + (32 * 8 + 8));
}
