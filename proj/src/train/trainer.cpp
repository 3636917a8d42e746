#include "marflow/train/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "marflow/core/log.hpp"
#include "marflow/ct/dataset.hpp"
#include "marflow/flow/checkpoint.hpp"

namespace marflow::train {
namespace {

Tensor<float> as_chw(const Tensor<double>& image) {
  return image.cast<float>().reshaped({1, image.dim(0), image.dim(1)});
}

void write_divergence_dump(const TrainConfig& config, const flow::RetinexFlow<float>& model,
                           const std::vector<StepLog>& log, int step, const std::string& reason) {
  if (config.out_dir.empty()) return;
  std::ofstream out(config.out_dir / "divergence.txt");
  out << "step=" << step << "\nreason=" << reason << "\n";
  for (std::size_t i = log.size() > 5 ? log.size() - 5 : 0; i < log.size(); ++i) {
    out << "log.step" << log[i].step << "=" << log[i].nll << "," << log[i].grad_norm << "\n";
  }
  for (const auto& p : model.parameters()) {
    out << "param." << p.name << ".finite=" << (p.value.all_finite() ? 1 : 0)
        << " max_abs=" << (p.value.all_finite() ? p.value.array().abs().maxCoeff() : 0.0f) << "\n";
  }
}

}  // namespace

std::vector<Pair> load_pairs(const std::filesystem::path& root, const std::string& split) {
  std::vector<Pair> out;
  for (const auto& dir : ct::list_cases(root, split)) {
    const ct::CaseInfo info = ct::read_case_info(dir);
    out.push_back({info.name, info.size_class, as_chw(ct::read_case_image(info, "corrupt")),
                   as_chw(ct::read_case_image(info, "gt")), ct::read_case_mask(info)});
  }
  return out;
}

void TrainConfig::validate() const {
  model.validate();
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (max_steps < 0) throw ConfigError("train.max_steps must be non-negative");
  if (!(adam.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(grad_clip > 0.0)) throw ConfigError("train.grad_clip must be positive");
  if (dequantization < 0.0) throw ConfigError("train.dequantization must be non-negative");
}

TrainResult train(const TrainConfig& config, const std::vector<Pair>& data, const StepCallback& on_step) {
  config.validate();
  if (data.empty()) throw ConfigError("train: no training cases");
  TrainResult result{flow::RetinexFlow<float>(config.model, config.seed), {}, 0};
  flow::RetinexFlow<float>& model = result.model;
  auto& params = model.parameters();
  if (!config.out_dir.empty()) std::filesystem::create_directories(config.out_dir);

  std::mt19937_64 rng(config.seed ^ 0xa0761d6478bd642fULL);
  std::uniform_real_distribution<float> noise(-0.5f, 0.5f);
  AdamState<float> adam;
  std::vector<std::size_t> order(data.size());
  const Index per_epoch = (static_cast<Index>(data.size()) + config.batch_size - 1) / config.batch_size;
  Index total = per_epoch * config.epochs;
  if (config.max_steps > 0) total = std::min<Index>(total, config.max_steps);

  int consecutive_bad = 0;
  int step = 0;
  for (int epoch = 0; epoch < config.epochs && step < total; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size() && step < total; start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<Tensor<float>> ys, xs;
      for (std::size_t i = start; i < end; ++i) {
        Tensor<float> y = data[order[i]].y;
        for (Index k = 0; k < y.size(); ++k) y[k] += static_cast<float>(config.dequantization) * noise(rng);
        ys.push_back(std::move(y));
        xs.push_back(data[order[i]].x);
      }
      ++step;
      params.zero_grad();
      const float weight = 1.0f / static_cast<float>(ys.size());
      double loss = 0.0;
      std::string failure;
      try {
        if (!model.actnorm_initialized()) model.initialize_actnorm(ys, xs);
        for (std::size_t i = 0; i < ys.size(); ++i) {
          ad::Tape<float> tape;
          flow::Binding<float> b(tape, params);
          const flow::NllPass<float> pass = model.nll(b, tape.constant(ys[i]), tape.constant(xs[i]));
          loss += static_cast<double>(pass.loss.value()[0]) / static_cast<double>(ys.size());
          tape.backward(pass.loss, weight);
        }
      } catch (const NumericalError& e) {
        failure = e.what();
      }
      const double norm = failure.empty() ? clip_grad_norm(params, config.grad_clip) : 0.0;
      if (failure.empty() && !adam_step(params, adam, config.adam)) failure = "non-finite gradient";
      if (!failure.empty()) {
        ++result.rejected_steps;
        log::warn("train: step " + std::to_string(step) + " rejected (" + failure + ")");
        if (++consecutive_bad >= 2) {
          write_divergence_dump(config, model, result.log, step, failure);
          throw DivergenceError("training diverged at step " + std::to_string(step) + ": " + failure);
        }
        continue;
      }
      consecutive_bad = 0;
      const StepLog entry{step, loss, flow::bits_per_dim(loss, ys[0].size()), norm};
      result.log.push_back(entry);
      if (on_step) on_step(entry);
      if (!config.out_dir.empty() && config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
        std::ostringstream name;
        name << "checkpoint_" << std::setw(6) << std::setfill('0') << step << ".rflw";
        flow::save_checkpoint(config.out_dir / name.str(), model);
      }
    }
  }
  if (!config.out_dir.empty()) {
    flow::save_checkpoint(config.out_dir / "model.rflw", model);
    write_loss_csv(config.out_dir / "loss.csv", result.log);
  }
  return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepLog>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,nll,bits_per_dim,grad_norm\n" << std::setprecision(10);
  for (const StepLog& s : log) out << s.step << ',' << s.nll << ',' << s.bits_per_dim << ',' << s.grad_norm << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<StepLog> read_loss_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "step,nll,bits_per_dim,grad_norm") throw IoError(path.string() + ": unexpected header");
  std::vector<StepLog> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    StepLog s;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream row(line);
    if (!(row >> s.step >> c1 >> s.nll >> c2 >> s.bits_per_dim >> c3 >> s.grad_norm) || c1 != ',' || c2 != ',' ||
        c3 != ',') {
      throw IoError(path.string() + ": malformed row '" + line + "'");
    }
    log.push_back(s);
  }
  return log;
}

std::vector<double> moving_average(const std::vector<StepLog>& log, int window) {
  std::vector<double> out;
  if (window < 1 || static_cast<int>(log.size()) < window) return out;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) sum += log[static_cast<std::size_t>(i)].bits_per_dim;
  out.push_back(sum / window);
  for (std::size_t i = static_cast<std::size_t>(window); i < log.size(); ++i) {
    sum += log[i].bits_per_dim - log[i - static_cast<std::size_t>(window)].bits_per_dim;
    out.push_back(sum / window);
  }
  return out;
}

std::vector<eval::MetricRow> evaluate(const flow::RetinexFlow<float>& model, const std::vector<Pair>& pairs,
                                      const std::string& method, double tau, bool include_input) {
  std::vector<eval::MetricRow> rows;
  for (const Pair& p : pairs) {
    const Tensor<double> gt = p.y.cast<double>();
    if (include_input) {
      const Tensor<double> x = p.x.cast<double>();
      rows.push_back({p.name, p.size_class, "input", eval::psnr(x, gt, &p.metal), eval::ssim(x, gt, &p.metal)});
    }
    const Tensor<double> est = model.infer(p.x, tau).cast<double>();
    rows.push_back({p.name, p.size_class, method, eval::psnr(est, gt, &p.metal), eval::ssim(est, gt, &p.metal)});
  }
  return rows;
}

std::vector<AblationArm> ablation_arms(const flow::ModelConfig& base) {
  std::vector<AblationArm> arms{{"base", base}};
  flow::ModelConfig c = base;
  c.feature_encoder = false;
  arms.push_back({"fe_off", c});
  c = base;
  c.steps = 1;
  arms.push_back({"k1", c});
  c = base;
  c.steps = 6;
  arms.push_back({"k6", c});
  c = base;
  c.freeze_invconv = false;
  arms.push_back({"freeze_off", c});
  c = base;
  c.hidden = 64;
  arms.push_back({"c64", c});
  return arms;
}

AblationReport ablation_suite(const TrainConfig& base, const std::vector<Pair>& train_set,
                              const std::vector<Pair>& test_set, const std::vector<std::uint64_t>& seeds,
                              const std::function<void(const AblationRun&)>& on_run) {
  AblationReport report;
  std::vector<eval::MetricRow> all;
  std::vector<std::string> names;
  for (const AblationArm& arm : ablation_arms(base.model)) {
    names.push_back(arm.name);
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.model = arm.model;
      cfg.seed = seed;
      cfg.out_dir.clear();
      const TrainResult r = train(cfg, train_set);
      AblationRun run{arm.name, seed, r.log.empty() ? 0.0 : r.log.back().bits_per_dim,
                      evaluate(r.model, test_set, arm.name)};
      all.insert(all.end(), run.rows.begin(), run.rows.end());
      if (on_run) on_run(run);
      report.runs.push_back(std::move(run));
    }
  }
  report.summary = eval::grouped_report(all, names);
  return report;
}

}  // namespace marflow::train
