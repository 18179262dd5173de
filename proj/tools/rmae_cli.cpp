// rmae_cli: data generation, segmentation, training, evaluation, FLOPs,
// attention maps, offline completion and the HTTP service.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "rmae/checkpoint.hpp"
#include "rmae/completion.hpp"
#include "rmae/evaluate.hpp"
#include "rmae/flops.hpp"
#include "rmae/service.hpp"
#include "rmae/synth.hpp"
#include "rmae/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rmae;

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  return json::parse(is);
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

ModelConfig model_config(const json& cfg, const std::string& preset_name) {
  ModelConfig m = preset(preset_name.empty() ? "desk" : preset_name);
  if (cfg.contains("model")) from_json(cfg["model"], m);
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked region autoencoding toolkit"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config (model/train/data/synth)");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { common.seed = s, common.seed_set = true; }, "RNG seed");
    sub->add_option("--out", common.out, "Output directory or file");
  };

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic shape dataset");
  add_common(gen);
  std::optional<int> gen_count, gen_size;
  gen->add_option("--count", gen_count, "Number of images");
  gen->add_option("--size", gen_size, "Image side length");

  // segment
  auto* seg = app.add_subcommand("segment", "Multi-scale FH regions for a dataset directory");
  add_common(seg);
  std::string seg_data;
  std::vector<double> seg_scales;
  double seg_sigma = 0.8;
  seg->add_option("--data", seg_data, "Dataset directory with images/")->required();
  seg->add_option("--scale", seg_scales, "FH scale (repeatable)");
  seg->add_option("--sigma", seg_sigma, "Gaussian pre-smoothing");

  // train
  auto* train = app.add_subcommand("train", "Train on synthetic shapes");
  add_common(train);
  std::string train_preset = "desk", train_variant, train_feed, train_regions;
  std::optional<int> train_steps;
  train->add_option("--preset", train_preset, "Model preset");
  train->add_option("--variant", train_variant, "channel | batch | length");
  train->add_option("--cross-feed", train_feed,
                    "pix_to_reg | reg_to_pix | bidirectional | rae_only | mae_only");
  train->add_option("--regions", train_regions, "ground_truth | fh");
  train->add_option("--steps", train_steps, "Total optimization steps");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out set");
  add_common(ev);
  std::string ev_ckpt;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint directory")->required();

  // flops
  auto* fl = app.add_subcommand("flops", "Analytic multiply-accumulate counts");
  add_common(fl);
  std::string fl_preset = "vit-b-mae", fl_variant, fl_feed;
  std::optional<int> fl_k;
  bool fl_json = false;
  fl->add_option("--preset", fl_preset, "desk | vit-b-mae | vit-b-rmae | vit-b-rae");
  fl->add_option("--variant", fl_variant, "Region variant");
  fl->add_option("--cross-feed", fl_feed, "Cross-feed mode");
  fl->add_option("--k", fl_k, "Regions per image");
  fl->add_flag("--json", fl_json, "Print JSON instead of a table");

  // attend
  auto* at = app.add_subcommand("attend", "Last-block attention heatmap for one patch");
  add_common(at);
  std::string at_ckpt, at_image;
  int at_query = 0;
  at->add_option("--checkpoint", at_ckpt, "Checkpoint directory")->required();
  at->add_option("--image", at_image, "PPM image")->required();
  at->add_option("--query", at_query, "Query patch index")->required();

  // complete
  auto* co = app.add_subcommand("complete", "Offline region completion");
  add_common(co);
  std::string co_ckpt, co_image, co_regions, co_prompts;
  int co_region = 0;
  double co_beta = 0.75;
  bool co_full = false;
  co->add_option("--checkpoint", co_ckpt, "Checkpoint directory")->required();
  co->add_option("--image", co_image, "PPM image")->required();
  co->add_option("--regions", co_regions, "Region file (.pgm + .json)");
  co->add_option("--region-index", co_region, "Region to complete");
  co->add_option("--beta", co_beta, "Mask ratio for the region");
  co->add_option("--prompts", co_prompts, "Prompt JSON as sent to POST /segment");
  co->add_flag("--full-image", co_full, "Show the whole image to the encoder");

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP region-completion service");
  add_common(sv);
  std::string sv_ckpt, sv_data, sv_host = "127.0.0.1";
  int sv_port = 8080;
  bool sv_full = false;
  sv->add_option("--checkpoint", sv_ckpt, "Checkpoint directory")->required();
  sv->add_option("--data", sv_data, "Dataset directory with images/")->required();
  sv->add_option("--host", sv_host, "Bind address");
  sv->add_option("--port", sv_port, "Port");
  sv->add_flag("--full-image", sv_full, "Show the whole image to the encoder");

  CLI11_PARSE(app, argc, argv);

  try {
    const json cfg = load_config(common.config_path);

    if (gen->parsed()) {
      SynthSpec spec;
      if (cfg.contains("synth")) from_json(cfg["synth"], spec);
      if (gen_count) spec.count = *gen_count;
      if (gen_size) spec.image_size = *gen_size;
      if (common.seed_set) spec.seed = common.seed;
      if (common.out.empty()) throw std::invalid_argument("--out is required");
      write_dataset(common.out, spec);
      std::cout << "wrote " << spec.count << " images to " << common.out << '\n';
      return 0;
    }

    if (seg->parsed()) {
      if (seg_scales.empty()) seg_scales = {500, 1000, 1500};
      const fs::path out = common.out.empty() ? fs::path(seg_data) / "regions_fh" : fs::path(common.out);
      fs::create_directories(out);
      for (const auto& id : list_image_ids(seg_data)) {
        const RegionSet rs =
            multi_scale_regions(read_pnm(image_path(seg_data, id)), seg_scales, seg_sigma);
        write_regions(out / (id + ".pgm"), rs);
        std::cout << id << ": " << rs.size() << " regions\n";
      }
      return 0;
    }

    if (train->parsed()) {
      ModelConfig mc = model_config(cfg, train_preset);
      TrainConfig tc = desk_train_config();
      DataConfig dc;
      if (cfg.contains("train")) from_json(cfg["train"], tc);
      if (cfg.contains("data")) from_json(cfg["data"], dc);
      if (!train_variant.empty()) mc.region.variant = rae_variant_from_string(train_variant);
      if (!train_feed.empty()) mc.cross_feed = cross_feed_from_string(train_feed);
      if (!train_regions.empty()) dc.regions = region_origin_from_string(train_regions);
      if (train_steps) {
        tc.total_steps = *train_steps;
        tc.warmup_steps = std::max(0, *train_steps / 20);
      }
      if (common.seed_set) tc.seed = common.seed;
      const fs::path out = common.out.empty() ? fs::path("checkpoint") : fs::path(common.out);
      Trainer trainer(mc, tc, dc);
      trainer.run(out, [&](const LogRow& r) {
        if (tc.log_every > 0 && r.step % tc.log_every == 0) {
          std::cout << "step " << r.step << " lr " << r.lr << " pixel " << r.pixel_loss
                    << " region " << r.region_loss << " total " << r.total << '\n';
        }
      });
      const Dataset held =
          Dataset::build(dc.heldout, dc, mc.patch, static_cast<int>(std::thread::hardware_concurrency()));
      const Metrics m = evaluate(trainer.model(), held, tc.seed + 1000, trainer.prior());
      trainer.save(out, m.to_json());
      std::cout << m.to_json().dump(2) << '\n';
      return 0;
    }

    if (ev->parsed()) {
      const json manifest = read_manifest(ev_ckpt);
      DataConfig dc;
      from_json(manifest.at("config").at("data"), dc);
      if (cfg.contains("data")) from_json(cfg["data"], dc);
      auto model = load_model(ev_ckpt);
      const Dataset held = Dataset::build(dc.heldout, dc, model->config().patch);
      const std::uint64_t seed =
          common.seed_set ? common.seed : manifest.at("config").at("train").value("seed", 0ULL) + 1000;
      const Metrics m = evaluate(*model, held, seed, manifest.value("prior", 0.5));
      std::cout << m.to_json().dump(2) << '\n';
      if (!common.out.empty()) write_json(common.out, m.to_json());
      return 0;
    }

    if (fl->parsed()) {
      ModelConfig mc = model_config(cfg, fl_preset);
      if (!fl_variant.empty()) mc.region.variant = rae_variant_from_string(fl_variant);
      if (!fl_feed.empty()) mc.cross_feed = cross_feed_from_string(fl_feed);
      if (fl_k) mc.region.k = *fl_k;
      const FlopsReport r = flops_estimate(mc);
      if (fl_json) {
        std::cout << r.to_json().dump(2) << '\n';
      } else {
        std::cout << r.table();
      }
      if (!common.out.empty()) write_json(common.out, r.to_json());
      return 0;
    }

    if (at->parsed()) {
      auto model = load_model(at_ckpt);
      const ModelConfig& mc = model->config();
      const Image img = read_pnm(at_image);
      const auto weights = model->attention_dump(patchify(img, mc.patch), at_query);
      const double top = *std::max_element(weights.begin(), weights.end());
      // One heatmap pixel per image pixel, constant within a patch.
      std::vector<std::uint8_t> gray(static_cast<std::size_t>(img.width) * img.height);
      const int g = mc.grid();
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const double w = weights[(y / mc.patch) * g + x / mc.patch] / top;
          gray[static_cast<std::size_t>(y) * img.width + x] =
              static_cast<std::uint8_t>(std::lround(255.0 * w));
        }
      const fs::path out = common.out.empty() ? fs::path("attention.pgm") : fs::path(common.out);
      write_pgm8(out, img.width, img.height, gray);
      std::cout << json(weights).dump() << '\n';
      return 0;
    }

    if (co->parsed()) {
      auto model = load_model(co_ckpt);
      const ModelConfig& mc = model->config();
      const Image img = read_pnm(co_image);
      const auto patches = patchify(img, mc.patch);
      Completion c;
      if (!co_prompts.empty()) {
        std::ifstream is(co_prompts);
        if (!is) throw std::runtime_error("cannot open " + co_prompts);
        c = complete_prompts(*model, patches, PromptSet::parse(json::parse(is)), co_full);
      } else {
        if (co_regions.empty()) throw std::invalid_argument("--regions or --prompts is required");
        const RegionSet rs = read_regions(co_regions);
        Rng rng(common.seed);
        const MaskPattern mask = sample_mask(mc.num_patches(), co_beta, rng);
        const RegionBatch region = make_region_batch(rs, {co_region}, mc.patch);
        c = complete_region(*model, patches, region, mask, co_full);
        json report = c.to_json();
        report["iou"] = completion_iou(c.probs, region, 0, mask);
        std::cout << report.dump() << '\n';
        if (!common.out.empty()) write_json(common.out, report);
        return 0;
      }
      std::cout << c.to_json().dump() << '\n';
      if (!common.out.empty()) write_json(common.out, c.to_json());
      return 0;
    }

    if (sv->parsed()) {
      std::shared_ptr<const RMaeModel> model = load_model(sv_ckpt);
      RegionService service(model, sv_data, sv_full);
      std::cout << "listening on " << sv_host << ':' << sv_port << std::endl;
      return service.listen(sv_host, sv_port) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
