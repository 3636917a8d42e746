#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "marflow/eval/metrics.hpp"
#include "marflow/flow/model.hpp"
#include "marflow/train/adam.hpp"

namespace marflow::train {

// One training or evaluation case as (1, H, W) intensity images.
struct Pair {
  std::string name;
  ct::SizeClass size_class = ct::SizeClass::Middle;
  Tensor<float> x;           // corrupted input
  Tensor<float> y;           // ground truth
  Tensor<double> metal;      // metal mask, excluded from metrics
};

// Reads corrupt.pgm / gt.pgm / mask.pgm of every case in root/split.
std::vector<Pair> load_pairs(const std::filesystem::path& root, const std::string& split);

struct TrainConfig {
  flow::ModelConfig model;
  int epochs = 1000;
  int max_steps = 200;  // 0: run every epoch
  int batch_size = 4;
  std::uint64_t seed = 1;
  // The paper's 2e-4 barely moves a desk-sized run in 200 steps.
  AdamConfig adam{.lr = 1e-3};
  double grad_clip = 100.0;
  // Uniform dequantization noise amplitude added to targets. Coarser than
  // one 8-bit level so the flow cannot collapse onto near-constant residuals.
  double dequantization = 1.0 / 16.0;
  int checkpoint_every = 50;  // steps; 0 disables intermediate checkpoints
  std::filesystem::path out_dir;  // empty: keep everything in memory

  void validate() const;
};

struct StepLog {
  int step = 0;
  double nll = 0.0;  // mean over the batch, nats per image
  double bits_per_dim = 0.0;
  double grad_norm = 0.0;  // before clipping
};

struct TrainResult {
  flow::RetinexFlow<float> model;
  std::vector<StepLog> log;
  int rejected_steps = 0;
};

using StepCallback = std::function<void(const StepLog&)>;

// Minimizes the mean NLL over seeded shuffled mini-batches. Actnorm is
// initialized from the first batch. Two consecutive non-finite steps abort
// with DivergenceError (after writing divergence.txt when out_dir is set).
TrainResult train(const TrainConfig& config, const std::vector<Pair>& data, const StepCallback& on_step = {});

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepLog>& log);
std::vector<StepLog> read_loss_csv(const std::filesystem::path& path);
// Trailing moving average of bits/dim; entry i averages steps [i, i + window).
std::vector<double> moving_average(const std::vector<StepLog>& log, int window);

// Scores the model's deterministic estimate (and, when include_input is set,
// the corrupted input) against ground truth on every pair.
std::vector<eval::MetricRow> evaluate(const flow::RetinexFlow<float>& model, const std::vector<Pair>& pairs,
                                      const std::string& method = "retinexflow", double tau = 0.0,
                                      bool include_input = false);

struct AblationArm {
  std::string name;
  flow::ModelConfig model;
};

// The base configuration and one arm per varied factor.
std::vector<AblationArm> ablation_arms(const flow::ModelConfig& base);

struct AblationRun {
  std::string arm;
  std::uint64_t seed = 0;
  double final_bits_per_dim = 0.0;
  std::vector<eval::MetricRow> rows;
};

struct AblationReport {
  std::vector<AblationRun> runs;
  std::vector<eval::SummaryRow> summary;  // one row per arm, means over seeds and cases
};

AblationReport ablation_suite(const TrainConfig& base, const std::vector<Pair>& train_set,
                              const std::vector<Pair>& test_set, const std::vector<std::uint64_t>& seeds,
                              const std::function<void(const AblationRun&)>& on_run = {});

}  // namespace marflow::train
