#include <cmath>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "rmae/checkpoint.hpp"
#include "rmae/completion.hpp"
#include "rmae/evaluate.hpp"
#include "rmae/trainer.hpp"
#include "test_util.hpp"

using namespace rmae;

namespace {

ModelConfig small_model(CrossFeed mode = CrossFeed::pix_to_reg) {
  ModelConfig c;
  c.image_size = 16;
  c.patch = 4;
  c.mlp_ratio = 2;
  c.pixel.enc_dim = 16;
  c.pixel.enc_depth = 1;
  c.pixel.enc_heads = 2;
  c.pixel.dec_dim = 16;
  c.pixel.dec_depth = 1;
  c.pixel.dec_heads = 2;
  c.pixel.norm_pix = false;
  c.region.p_e = 16;
  c.region.p_d = 16;
  c.region.heads = 2;
  c.region.head_hidden = 8;
  c.region.k = 4;
  c.cross_feed = mode;
  return c;
}

TrainConfig small_train(int steps = 20) {
  TrainConfig t = desk_train_config();
  t.batch_size = 4;
  t.total_steps = steps;
  t.warmup_steps = 2;
  return t;
}

DataConfig small_data() {
  DataConfig d;
  d.train.image_size = 16;
  d.train.count = 24;
  d.heldout.image_size = 16;
  d.heldout.count = 12;
  return d;
}

std::vector<Tensor> one_param(Shape shape, Scalar v, Scalar g) {
  Tensor t = Tensor::full(shape, v, true);
  Tensor loss = scale(sum(t), g);
  backward(loss);
  return {t};
}

}  // namespace

TEST_CASE("learning-rate schedule endpoints") {
  TrainConfig c;
  c.base_lr = 1e-4;
  c.batch_size = 64;
  c.total_steps = 100;
  c.warmup_steps = 5;
  const double peak = 1e-4 * 64 / 256;
  CHECK(lr_at(0, c) == 0.0);
  CHECK(lr_at(5, c) == peak);
  CHECK(std::abs(lr_at(100, c)) < 1e-12);
  CHECK(lr_at(3, c) == doctest::Approx(peak * 3 / 5));
  CHECK(lr_at(52, c) == doctest::Approx(0.5 * peak * (1 + std::cos(std::numbers::pi * 47 / 95))));
  for (int s = 5; s < 100; ++s) CHECK(lr_at(s + 1, c) <= lr_at(s, c));
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.warmup_steps = c.total_steps;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.base_lr = 0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("adamw with zero gradient and no decay is a no-op") {
  TrainConfig c;
  c.weight_decay = 0;
  auto ps = one_param({3, 2}, 0.7f, 0.0f);
  AdamState st;
  adamw_step(ps, st, 0.1, c);
  for (Scalar v : ps[0].data()) CHECK(v == 0.7f);
}

TEST_CASE("adamw single step on x squared") {
  TrainConfig c;
  c.weight_decay = 0.05;
  const double lr = 0.01;
  // f(x) = x^2 at x = 1: g = 2.
  Tensor x = Tensor::full({2, 1}, 1.0f, true);
  backward(sum(mul(x, x)));
  std::vector<Tensor> ps{x};
  AdamState st;
  adamw_step(ps, st, lr, c);
  const double g = 2.0;
  const double m = (1 - c.beta1) * g / (1 - c.beta1);
  const double v = (1 - c.beta2) * g * g / (1 - c.beta2);
  const double expect = 1.0 * (1 - lr * c.weight_decay) - lr * m / (std::sqrt(v) + 1e-8);
  for (Scalar xv : x.data()) CHECK(xv == doctest::Approx(expect).epsilon(1e-6));
  CHECK(st.t == 1);
}

TEST_CASE("decay alone shrinks matrices by 1 - lr*wd and leaves vectors") {
  TrainConfig c;
  c.weight_decay = 0.1;
  auto mat = one_param({2, 2}, 2.0f, 0.0f);
  auto vec = one_param({4}, 2.0f, 0.0f);
  AdamState a, b;
  adamw_step(mat, a, 0.5, c);
  adamw_step(vec, b, 0.5, c);
  for (Scalar v : mat[0].data()) CHECK(v == doctest::Approx(2.0 * (1 - 0.5 * 0.1)));
  for (Scalar v : vec[0].data()) CHECK(v == 2.0f);
}

TEST_CASE("gradient clipping bounds the global norm") {
  auto ps = one_param({4}, 0.0f, 3.0f);  // norm 6
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(6.0));
  double sq = 0;
  for (Scalar g : ps[0].grad()) sq += double(g) * g;
  CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("training is deterministic under a seed") {
  const auto data = std::make_shared<const Dataset>(
      Dataset::build(small_data().train, small_data(), 4));
  Trainer a(small_model(), small_train(6), small_data(), data);
  Trainer b(small_model(), small_train(6), small_data(), data);
  a.run();
  b.run();
  REQUIRE(a.log().size() == 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a.log()[i].total == b.log()[i].total);
    CHECK(a.log()[i].region_loss == b.log()[i].region_loss);
  }
  TrainConfig other = small_train(6);
  other.seed = 9;
  Trainer c(small_model(), other, small_data(), data);
  c.run();
  CHECK(c.log()[0].total != a.log()[0].total);
}

TEST_CASE("a non-finite loss aborts with the step and config") {
  Trainer t(small_model(), small_train(5), small_data());
  t.train_step();
  for (Tensor p : t.model().params().tensors())
    if (p.name() == "pix.embed.weight") p.data()[0] = std::numeric_limits<Scalar>::quiet_NaN();
  try {
    t.train_step();
    FAIL("expected TrainingDiverged");
  } catch (const TrainingDiverged& e) {
    CHECK(e.step() == 2);
    CHECK(std::string(e.what()).find("\"cross_feed\"") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip reproduces metrics bit-exactly") {
  rmae_test::TempDir dir("ckpt");
  const DataConfig dc = small_data();
  Trainer t(small_model(), small_train(8), dc);
  t.run(dir.path() / "run");
  const Dataset held = Dataset::build(dc.heldout, dc, 4);
  const Metrics before = evaluate(t.model(), held, 5, t.prior());

  const auto loaded = load_model(dir.path() / "run");
  const Metrics after = evaluate(*loaded, held, 5, t.prior());
  CHECK(after.region_bce == before.region_bce);
  CHECK(after.completion_iou == before.completion_iou);
  CHECK(after.pixel_mse == before.pixel_mse);
  CHECK(checkpoint_model_config(dir.path() / "run").cross_feed == CrossFeed::pix_to_reg);

  SUBCASE("resuming continues the same curve") {
    Trainer full(small_model(), small_train(8), dc);
    for (int i = 0; i < 8; ++i) full.train_step();
    Trainer half(small_model(), small_train(8), dc);
    for (int i = 0; i < 4; ++i) half.train_step();
    half.save(dir.path() / "half");
    Trainer resumed(small_model(), small_train(8), dc);
    resumed.load(dir.path() / "half");
    CHECK(resumed.step() == 4);
    resumed.run();
    REQUIRE(resumed.log().size() == 8u);
    CHECK(resumed.log().back().total == full.log().back().total);
  }

  SUBCASE("the loss log is written as CSV") {
    std::ifstream is(dir.path() / "run" / "loss.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "step,lr,pixel_loss,region_loss,total");
    int rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    CHECK(rows == 8);
  }

  SUBCASE("a missing tensor fails to load") {
    std::filesystem::remove(dir.path() / "run" / "params" / "pix.embed.weight.bin");
    CHECK_THROWS(load_model(dir.path() / "run"));
  }
}

TEST_CASE("untrained completion is near the constant baseline") {
  const DataConfig dc = small_data();
  Trainer t(small_model(), small_train(), dc);
  const Dataset held = Dataset::build(dc.heldout, dc, 4);
  const Metrics m = evaluate(t.model(), held, 3, t.prior());
  CHECK(m.images == 12);
  CHECK(std::abs(m.completion_iou - m.baseline_iou) < 0.05);
  CHECK(m.region_bce < 1.0);
}

TEST_CASE("evaluation is deterministic and geometry-checked") {
  const DataConfig dc = small_data();
  Trainer t(small_model(), small_train(), dc);
  const Dataset held = Dataset::build(dc.heldout, dc, 4);
  const Metrics a = evaluate(t.model(), held, 3, t.prior());
  const Metrics b = evaluate(t.model(), held, 3, t.prior());
  CHECK(a.to_json() == b.to_json());
  DataConfig wrong = dc;
  wrong.heldout.image_size = 32;
  CHECK_THROWS(evaluate(t.model(), Dataset::build(wrong.heldout, wrong, 4), 3));
}

TEST_CASE("oracle predictions give IoU 1") {
  const DataConfig dc = small_data();
  const Dataset held = Dataset::build(dc.heldout, dc, 4);
  Rng rng(4);
  for (std::size_t i = 0; i < held.size(); ++i) {
    const MaskedRegions mr =
        sample_masked_regions(held.regions[i], 16, 0.75, 0.75, MaskSharing::shared, 3, 4, rng);
    for (int r = 0; r < mr.batch.k; ++r) {
      const std::size_t per = 16 * 16;
      std::vector<double> probs(per);
      for (std::size_t j = 0; j < per; ++j) probs[j] = mr.batch.patches[r * per + j];
      CHECK(completion_iou(probs, mr.batch, r, mr.region_mask) == 1.0);
    }
  }
}

TEST_CASE("paired bootstrap lower bound") {
  const std::vector<double> a{1, 2, 3, 4}, b{0, 1, 2, 3};
  CHECK(paired_bootstrap_lower(a, b, 2.5, 200, 1) == doctest::Approx(1.0));
  CHECK_THROWS(paired_bootstrap_lower(a, {1.0}, 2.5, 10, 1));
}

TEST_CASE("region branch alone learns on a frozen random encoder") {
  ModelConfig mc = preset("desk");
  mc.cross_feed = CrossFeed::rae_only;
  TrainConfig tc = desk_train_config();
  tc.total_steps = 60;
  tc.freeze_encoder = true;
  const DataConfig dc;
  Trainer t(mc, tc, dc);
  const auto before = t.model().params().find("pix.enc0.attn.q.weight").values();
  t.run();
  CHECK(t.model().params().find("pix.enc0.attn.q.weight").values() == before);
  const Dataset held = Dataset::build(dc.heldout, dc, mc.patch);
  const Metrics m = evaluate(t.model(), held, 3, t.prior());
  CHECK(m.region_bce < std::log(2.0));
  CHECK(t.log().back().region_loss < t.log().front().region_loss);
}
