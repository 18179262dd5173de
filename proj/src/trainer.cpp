#include "rmae/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "rmae/checkpoint.hpp"

namespace rmae {

namespace fs = std::filesystem;

std::string to_string(RegionOrigin o) { return o == RegionOrigin::fh ? "fh" : "ground_truth"; }

RegionOrigin region_origin_from_string(const std::string& s) {
  if (s == "fh") return RegionOrigin::fh;
  if (s == "ground_truth" || s == "gt") return RegionOrigin::ground_truth;
  throw std::invalid_argument("unknown region origin '" + s + "'");
}

void to_json(nlohmann::json& j, const DataConfig& c) {
  j = {{"train", c.train},
       {"heldout", c.heldout},
       {"regions", to_string(c.regions)},
       {"fh_scales", c.fh_scales},
       {"fh_sigma", c.fh_sigma}};
}

void from_json(const nlohmann::json& j, DataConfig& c) {
  if (j.contains("train")) from_json(j["train"], c.train);
  if (j.contains("heldout")) from_json(j["heldout"], c.heldout);
  if (j.contains("regions")) c.regions = region_origin_from_string(j["regions"].get<std::string>());
  if (j.contains("fh_scales")) c.fh_scales = j["fh_scales"].get<std::vector<double>>();
  c.fh_sigma = j.value("fh_sigma", c.fh_sigma);
}

Dataset Dataset::build(const SynthSpec& spec, const DataConfig& data, int patch, int threads) {
  Dataset d;
  d.patch = patch;
  d.samples = synth_dataset(spec);
  d.patches.resize(d.samples.size());
  d.regions.resize(d.samples.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < d.samples.size(); i += stride) {
      d.patches[i] = patchify(d.samples[i].image, patch);
      d.regions[i] = data.regions == RegionOrigin::fh
                         ? multi_scale_regions(d.samples[i].image, data.fh_scales, data.fh_sigma)
                         : ground_truth_regions(d.samples[i]);
    }
  };
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  return d;
}

double lr_at(int step, const TrainConfig& cfg) {
  const double peak = cfg.peak_lr();
  if (step <= 0) return 0.0;
  if (step < cfg.warmup_steps) return peak * step / cfg.warmup_steps;
  if (step >= cfg.total_steps) return 0.0;
  const double progress =
      static_cast<double>(step - cfg.warmup_steps) / (cfg.total_steps - cfg.warmup_steps);
  return 0.5 * peak * (1.0 + std::cos(std::numbers::pi * progress));
}

void adamw_step(std::vector<Tensor>& params, AdamState& state, double lr, const TrainConfig& cfg) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].numel(), 0.0);
      state.v[i].assign(params[i].numel(), 0.0);
    }
  }
  state.t += 1;
  const double b1 = cfg.beta1, b2 = cfg.beta2, eps = 1e-8;
  const double c1 = 1.0 - std::pow(b1, state.t);
  const double c2 = 1.0 - std::pow(b2, state.t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto x = p.data();
    const bool has = p.has_grad();
    const auto g = p.grad();
    const double decay = p.rank() >= 2 ? 1.0 - lr * cfg.weight_decay : 1.0;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double gj = has ? static_cast<double>(g[j]) : 0.0;
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      const double update = (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
      x[j] = static_cast<float>(static_cast<double>(x[j]) * decay - lr * update);
    }
  }
}

double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
  double sq = 0;
  for (const Tensor& p : params) {
    for (float g : p.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const float s = static_cast<float>(max_norm / (norm + 1e-12));
    for (Tensor& p : params) {
      if (!p.has_grad()) continue;
      for (float& g : p.grad_buffer()) g *= s;
    }
  }
  return norm;
}

Trainer::Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                 const DataConfig& data_cfg, std::shared_ptr<const Dataset> train_set)
    : model_cfg_(model_cfg),
      train_cfg_(train_cfg),
      data_cfg_(data_cfg),
      data_(std::move(train_set)),
      rng_(train_cfg.seed ^ 0xA5A5A5A5DEADBEEFULL) {
  train_cfg_.validate();
  model_ = std::make_unique<RMaeModel>(model_cfg_, train_cfg_.seed);
  if (!data_) {
    data_ = std::make_shared<const Dataset>(
        Dataset::build(data_cfg_.train, data_cfg_, model_cfg_.patch));
  }
  if (data_->size() == 0) throw std::invalid_argument("training set is empty");
  if (data_->patch != model_cfg_.patch ||
      data_->samples.front().image.width != model_cfg_.image_size) {
    throw std::invalid_argument("training images do not match the model geometry");
  }
  double acc = 0;
  std::size_t maps = 0;
  for (const auto& rs : data_->regions) {
    for (const auto& m : rs.maps) {
      acc += static_cast<double>(std::count(m.begin(), m.end(), std::uint8_t{1})) /
             static_cast<double>(m.size());
      ++maps;
    }
  }
  prior_ = maps ? acc / static_cast<double>(maps) : 0.5;
  model_->init_region_bias(prior_);
  for (const Tensor& t : model_->params().tensors()) {
    if (train_cfg_.freeze_encoder && t.name().rfind("pix.e", 0) == 0) continue;
    trainable_.push_back(t);
  }
}

LogRow Trainer::train_step() {
  ++step_;
  const ModelConfig& mc = model_cfg_;
  const double lr = lr_at(step_, train_cfg_);
  for (Tensor& t : model_->params().tensors()) t.zero_grad();

  LogRow row;
  row.step = step_;
  row.lr = lr;
  const int bs = train_cfg_.batch_size;
  const float inv = 1.0f / static_cast<float>(bs);
  for (int b = 0; b < bs; ++b) {
    const int idx = rng_.below(static_cast<int>(data_->size()));
    MaskedRegions mr = sample_masked_regions(data_->regions[idx], mc.num_patches(),
                                             mc.pixel.beta_i, mc.region.beta_r, mc.region.sharing,
                                             mc.region.k, mc.patch, rng_);
    ForwardResult fr = model_->forward(data_->patches[idx], mr.image_mask, &mr.batch,
                                       mr.region_mask);
    row.pixel_loss += fr.pixel_loss.item() / bs;
    row.region_loss += fr.region_loss.item() / bs;
    row.total += fr.total.item() / bs;
    backward(scale(fr.total, inv));
  }
  if (!std::isfinite(row.total)) {
    nlohmann::json dump = {{"model", model_cfg_}, {"train", train_cfg_}, {"data", data_cfg_}};
    throw TrainingDiverged(step_, dump.dump());
  }
  clip_grad_norm(trainable_, train_cfg_.grad_clip);
  adamw_step(trainable_, adam_, lr, train_cfg_);
  log_.push_back(row);
  return row;
}

void Trainer::run(const fs::path& out, const std::function<void(const LogRow&)>& on_step) {
  while (step_ < train_cfg_.total_steps) {
    const LogRow row = train_step();
    if (on_step) on_step(row);
    if (!out.empty() && train_cfg_.checkpoint_every > 0 &&
        step_ % train_cfg_.checkpoint_every == 0 && step_ < train_cfg_.total_steps) {
      save(out);
    }
  }
  if (!out.empty()) save(out);
}

void write_loss_csv(const fs::path& path, const std::vector<LogRow>& log) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "step,lr,pixel_loss,region_loss,total\n";
  os.precision(9);
  for (const auto& r : log) {
    os << r.step << ',' << r.lr << ',' << r.pixel_loss << ',' << r.region_loss << ',' << r.total
       << '\n';
  }
}

namespace {

std::vector<LogRow> read_loss_csv(const fs::path& path) {
  std::vector<LogRow> out;
  std::ifstream is(path);
  if (!is) return out;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    LogRow r;
    if (ls >> r.step >> r.lr >> r.pixel_loss >> r.region_loss >> r.total) out.push_back(r);
  }
  return out;
}

// Raw little-endian doubles so a resumed run continues bit-for-bit.
void write_moments(const fs::path& path, const std::vector<double>& v) {
  std::ofstream os(path, std::ios::binary);
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

std::vector<double> read_moments(const fs::path& path, std::size_t n) {
  std::vector<double> v(n);
  std::ifstream is(path, std::ios::binary);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is || is.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error(path.string() + ": expected " + std::to_string(n) + " moments");
  }
  return v;
}

}  // namespace

void Trainer::save(const fs::path& dir, const nlohmann::json& metrics) const {
  save_params(dir, model_->params());
  fs::create_directories(dir / "optim");
  const auto& ps = trainable_;
  for (std::size_t i = 0; i < ps.size() && i < adam_.m.size(); ++i) {
    write_moments(dir / "optim" / (ps[i].name() + ".m.f64"), adam_.m[i]);
    write_moments(dir / "optim" / (ps[i].name() + ".v.f64"), adam_.v[i]);
  }
  nlohmann::json manifest = {
      {"config", {{"model", model_cfg_}, {"train", train_cfg_}, {"data", data_cfg_}}},
      {"step", step_},
      {"adam_t", adam_.t},
      {"rng_state", rng_.state()},
      {"prior", prior_},
      {"metrics", metrics.is_null() ? nlohmann::json::object() : metrics}};
  write_manifest(dir, manifest);
  write_loss_csv(dir / "loss.csv", log_);
}

void Trainer::load(const fs::path& dir) {
  const auto manifest = read_manifest(dir);
  if (manifest.at("config").at("model") != nlohmann::json(model_cfg_)) {
    throw std::invalid_argument("checkpoint model config differs from the trainer's");
  }
  load_params(dir, model_->params());
  step_ = manifest.value("step", 0);
  adam_.t = manifest.value("adam_t", 0);
  prior_ = manifest.value("prior", prior_);
  rng_.set_state(manifest.at("rng_state").get<std::string>());
  adam_.m.assign(trainable_.size(), {});
  adam_.v.assign(trainable_.size(), {});
  for (std::size_t i = 0; i < trainable_.size(); ++i) {
    const fs::path pm = dir / "optim" / (trainable_[i].name() + ".m.f64");
    const fs::path pv = dir / "optim" / (trainable_[i].name() + ".v.f64");
    if (!fs::exists(pm) || !fs::exists(pv)) {
      adam_.m[i].assign(trainable_[i].numel(), 0.0);
      adam_.v[i].assign(trainable_[i].numel(), 0.0);
      continue;
    }
    adam_.m[i] = read_moments(pm, trainable_[i].numel());
    adam_.v[i] = read_moments(pv, trainable_[i].numel());
  }
  log_ = read_loss_csv(dir / "loss.csv");
}

}  // namespace rmae
