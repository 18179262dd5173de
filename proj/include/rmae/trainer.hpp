#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmae/config.hpp"
#include "rmae/model.hpp"
#include "rmae/synth.hpp"

namespace rmae {

enum class RegionOrigin { ground_truth, fh };
std::string to_string(RegionOrigin o);
RegionOrigin region_origin_from_string(const std::string& s);

struct DataConfig {
  SynthSpec train{.count = 256, .seed = 1};
  SynthSpec heldout{.count = 64, .seed = 2};
  RegionOrigin regions = RegionOrigin::ground_truth;
  std::vector<double> fh_scales{50.0, 100.0, 150.0};
  double fh_sigma = 0.8;
};

void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);

// Images with their patches and region sets, ready for sampling.
struct Dataset {
  int patch = 0;
  std::vector<SynthSample> samples;
  std::vector<std::vector<float>> patches;
  std::vector<RegionSet> regions;

  std::size_t size() const { return samples.size(); }
  // FH runs on `threads` workers when regions come from segmentation.
  static Dataset build(const SynthSpec& spec, const DataConfig& data, int patch, int threads = 1);
};

// Linear warmup to base_lr * batch_size / 256, then half-cosine to zero.
double lr_at(int step, const TrainConfig& cfg);

struct AdamState {
  int t = 0;
  std::vector<std::vector<double>> m, v;
};

// Decoupled weight decay is applied to matrices only (rank >= 2); vectors
// (biases, norms, tokens) are not decayed.
void adamw_step(std::vector<Tensor>& params, AdamState& state, double lr, const TrainConfig& cfg);

// Scales grads so their global L2 norm is at most max_norm; returns the norm
// before clipping.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

struct LogRow {
  int step = 0;
  double lr = 0, pixel_loss = 0, region_loss = 0, total = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int step, const std::string& config_dump)
      : std::runtime_error("non-finite loss at step " + std::to_string(step) +
                           "; config: " + config_dump),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class Trainer {
 public:
  Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const DataConfig& data_cfg,
          std::shared_ptr<const Dataset> train_set = nullptr);

  RMaeModel& model() { return *model_; }
  const RMaeModel& model() const { return *model_; }
  const TrainConfig& train_config() const { return train_cfg_; }
  const DataConfig& data_config() const { return data_cfg_; }
  const Dataset& dataset() const { return *data_; }
  int step() const { return step_; }
  const std::vector<LogRow>& log() const { return log_; }
  double prior() const { return prior_; }

  // One optimization step over batch_size images.
  LogRow train_step();
  // Runs the remaining steps; checkpoints into `out` when it is non-empty.
  void run(const std::filesystem::path& out = {},
           const std::function<void(const LogRow&)>& on_step = {});

  void save(const std::filesystem::path& dir, const nlohmann::json& metrics = {}) const;
  // Restores parameters, optimizer moments, step, rng and log.
  void load(const std::filesystem::path& dir);

 private:
  ModelConfig model_cfg_;
  TrainConfig train_cfg_;
  DataConfig data_cfg_;
  std::shared_ptr<const Dataset> data_;
  std::unique_ptr<RMaeModel> model_;
  std::vector<Tensor> trainable_;
  AdamState adam_;
  Rng rng_;
  int step_ = 0;
  double prior_ = 0.5;
  std::vector<LogRow> log_;
};

void write_loss_csv(const std::filesystem::path& path, const std::vector<LogRow>& log);

}  // namespace rmae
