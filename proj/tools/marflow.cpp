// marflow: simulate, correct and evaluate metal-corrupted CT slices.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "marflow/app/run_config.hpp"
#include "marflow/core/log.hpp"
#include "marflow/core/parallel.hpp"
#include "marflow/ct/pgm.hpp"
#include "marflow/flow/checkpoint.hpp"
#include "marflow/mar/classical.hpp"

namespace fs = std::filesystem;
using namespace marflow;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kDiverged = 3, kShape = 4 };

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

app::RunConfig load_config(const Common& c) {
  app::RunConfig rc = c.config_path.empty() ? app::RunConfig{} : app::load_run_config(c.config_path);
  for (const std::string& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
      return s;
    };
    rc.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  rc.validate();
  return rc;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "Run config file (key = value lines)")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "Override one config key, e.g. --set train.max_steps=50");
}

// Case directories named directly, or every case of a split under --data.
std::vector<fs::path> case_dirs(const std::vector<std::string>& cases, const std::string& data, const std::string& split) {
  std::vector<fs::path> out(cases.begin(), cases.end());
  if (!data.empty()) {
    const auto found = ct::list_cases(data, split);
    if (found.empty()) throw IoError("no " + split + " cases under " + data);
    out.insert(out.end(), found.begin(), found.end());
  }
  if (out.empty()) throw ConfigError("give --case or --data");
  return out;
}

Tensor<float> as_flow_input(const Tensor<double>& image) {
  return image.cast<float>().reshaped({1, image.dim(0), image.dim(1)});
}

void require_flow_size(const flow::ModelConfig& model, Index h, Index w, const std::string& what) {
  const Index m = Index{1} << model.levels;
  if (h % m == 0 && w % m == 0) return;
  const Index ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
  throw ShapeError(what + ": " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by " +
                   std::to_string(m) + "; pad to " + std::to_string(ph) + "x" + std::to_string(pw));
}

Tensor<double> abs_difference(const Tensor<double>& a, const Tensor<double>& b) {
  Tensor<double> d(a.shape());
  d.array() = (a.array() - b.array()).abs();
  return d;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Common& common, const std::string& out, Index n, std::uint64_t seed) {
  const app::RunConfig rc = load_config(common);
  if (n < 1) throw ConfigError("--n must be at least 1");
  fs::create_directories(out);
  std::vector<std::string> lines(static_cast<std::size_t>(n));
  parallel_for(n, [&](std::int64_t i) {
    const ct::SimCase c = ct::simulate_case(rc.sim, i, n, seed);
    const fs::path dir = ct::write_case(out, c, rc.sim);
    std::ostringstream s;
    s << std::left << std::setw(12) << c.name() << std::setw(7) << (c.test ? "test" : "train") << std::setw(11)
      << ct::to_string(c.metal.size_class) << " metal_area=" << c.metal.area();
    lines[static_cast<std::size_t>(i)] = s.str();
  });
  std::ofstream(fs::path(out) / "config.txt") << rc.to_text();
  for (const auto& l : lines) std::cout << l << '\n';
  const Index n_test = static_cast<Index>(std::llround(static_cast<double>(n) * rc.sim.test_fraction));
  std::cout << n << " cases (" << n - n_test << " train, " << n_test << " test) written to " << out << '\n';
  return kOk;
}

// ---------------------------------------------------------------- baseline

int cmd_baseline(const std::vector<std::string>& methods, const std::vector<std::string>& cases,
                 const std::string& data, const std::string& split) {
  for (const auto& m : methods) {
    if (m != "li" && m != "nmar") throw ConfigError("unknown baseline '" + m + "' (use li or nmar)");
  }
  const auto dirs = case_dirs(cases, data, split);
  std::vector<mar::MarDiagnostics> diags(dirs.size());
  parallel_for(static_cast<std::int64_t>(dirs.size()), [&](std::int64_t i) {
    const ct::CaseInfo info = ct::read_case_info(dirs[static_cast<std::size_t>(i)]);
    const ct::Sinogram sino = ct::read_case_sinogram(info, "sino_metal");
    const mar::MetalTrace trace = mar::metal_trace(ct::read_case_mask(info), info.geometry);
    for (const auto& m : methods) {
      ct::Sinogram corrected;
      if (m == "li") {
        corrected = mar::li_correct(sino, trace, &diags[static_cast<std::size_t>(i)]);
      } else {
        corrected = mar::nmar_correct(sino, trace, ct::fbp_reconstruct(sino), &diags[static_cast<std::size_t>(i)]);
      }
      ct::write_case_image(info, m, ct::to_intensity(mar::classical_reconstruct(corrected), info.value_hi));
    }
  });
  Index fallbacks = 0;
  for (const auto& d : diags) fallbacks += d.prior_fallbacks;
  std::cout << "corrected " << dirs.size() << " case(s) with";
  for (const auto& m : methods) std::cout << ' ' << m;
  std::cout << '\n';
  if (fallbacks > 0) std::cout << fallbacks << " NMAR run(s) fell back to LI\n";
  return kOk;
}

// ------------------------------------------------------------------- train

int cmd_train(const Common& common, const std::string& data, const std::string& out) {
  app::RunConfig rc = load_config(common);
  rc.train.out_dir = out;
  const auto pairs = train::load_pairs(data, "train");
  if (pairs.empty()) throw IoError("no training cases under " + data);
  require_flow_size(rc.train.model, pairs[0].y.height(), pairs[0].y.width(), "train");
  fs::create_directories(out);
  std::ofstream(fs::path(out) / "config.txt") << rc.to_text();
  std::cout << "training on " << pairs.size() << " cases\n";
  const auto result = train::train(rc.train, pairs, [](const train::StepLog& s) {
    if (s.step % 20 == 0 || s.step == 1) {
      std::cout << "step " << std::setw(5) << s.step << "  bits/dim " << std::fixed << std::setprecision(4)
                << s.bits_per_dim << "  grad_norm " << std::setprecision(1) << s.grad_norm << std::defaultfloat
                << std::endl;
    }
  });
  std::cout << result.log.size() << " steps, " << result.rejected_steps << " rejected; model written to "
            << (fs::path(out) / "model.rflw").string() << '\n';
  return kOk;
}

// ------------------------------------------------------------------- infer

int cmd_infer(const std::string& ckpt, const std::string& in, const std::string& out, const std::string& data,
              const std::string& split, double tau, std::uint64_t seed) {
  const flow::RetinexFlow<float> model = flow::load_checkpoint(ckpt);
  auto run = [&](const Tensor<double>& x, const std::string& what) {
    require_flow_size(model.config(), x.dim(0), x.dim(1), what);
    const Tensor<double> y = model.infer(as_flow_input(x), tau, seed).cast<double>().reshaped(x.shape());
    return std::pair{y, abs_difference(y, x)};
  };
  if (!data.empty()) {
    const auto dirs = ct::list_cases(data, split);
    if (dirs.empty()) throw IoError("no " + split + " cases under " + data);
    parallel_for(static_cast<std::int64_t>(dirs.size()), [&](std::int64_t i) {
      const ct::CaseInfo info = ct::read_case_info(dirs[static_cast<std::size_t>(i)]);
      const auto [y, diff] = run(ct::read_case_image(info, "corrupt"), info.dir.string());
      ct::write_case_image(info, "retinexflow", y);
      ct::write_case_image(info, "retinexflow_diff", diff);
    });
    std::cout << "corrected " << dirs.size() << " case(s)\n";
    return kOk;
  }
  if (in.empty() || out.empty()) throw ConfigError("give --in and --out, or --data");
  const auto [y, diff] = run(ct::read_pgm16(in, 0.0, 1.0), in);
  fs::path diff_path = out;
  diff_path.replace_filename(diff_path.stem().string() + "_diff.pgm");
  ct::write_pgm16(out, y, 0.0, 1.0);
  ct::write_pgm16(diff_path, diff, 0.0, 1.0);
  std::cout << "wrote " << out << " and " << diff_path.string() << '\n';
  return kOk;
}

// -------------------------------------------------------------------- eval

int cmd_eval(const std::string& data, std::vector<std::string> methods, const std::string& out,
             const std::string& split) {
  const auto dirs = ct::list_cases(data, split);
  if (dirs.empty()) throw IoError("no " + split + " cases under " + data);
  std::erase(methods, "input");
  methods.insert(methods.begin(), "input");
  std::vector<std::vector<eval::MetricRow>> per_case(dirs.size());
  std::vector<std::vector<std::string>> missing(dirs.size());
  parallel_for(static_cast<std::int64_t>(dirs.size()), [&](std::int64_t i) {
    const auto k = static_cast<std::size_t>(i);
    const ct::CaseInfo info = ct::read_case_info(dirs[k]);
    const Tensor<double> gt = ct::read_case_image(info, "gt"), mask = ct::read_case_mask(info);
    for (const auto& m : methods) {
      const std::string stem = m == "input" ? "corrupt" : m;
      if (!fs::exists(info.dir / (stem + ".pgm"))) {
        missing[k].push_back(info.name + "/" + stem + ".pgm");
        continue;
      }
      const Tensor<double> est = ct::read_case_image(info, stem);
      per_case[k].push_back({info.name, info.size_class, m, eval::psnr(est, gt, &mask), eval::ssim(est, gt, &mask)});
    }
  });
  std::vector<eval::MetricRow> rows;
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    rows.insert(rows.end(), per_case[k].begin(), per_case[k].end());
    for (const auto& f : missing[k]) log::warn("eval: missing " + f + "; row omitted");
  }
  // Requested methods in canonical order.
  std::vector<std::string> order;
  for (const auto& m : eval::ordered_methods(rows)) {
    if (std::find(methods.begin(), methods.end(), m) != methods.end()) order.push_back(m);
  }
  for (const auto& m : methods) {
    if (std::find(order.begin(), order.end(), m) == order.end()) order.push_back(m);
  }
  const auto summary = eval::grouped_report(rows, order);
  fs::create_directories(out);
  eval::write_metrics_csv(fs::path(out) / "metrics.csv", rows);
  eval::write_summary_csv(fs::path(out) / "summary.csv", summary);
  std::cout << eval::format_summary(summary);
  return kOk;
}

// ------------------------------------------------------------------- stats

int cmd_stats(const std::string& case_dir, const std::string& out) {
  const ct::CaseInfo info = ct::read_case_info(case_dir);
  const auto clean = ct::row_mean_stats(ct::read_case_sinogram(info, "sino_clean"));
  const auto metal = ct::row_mean_stats(ct::read_case_sinogram(info, "sino_metal"));
  std::ofstream csv(out);
  if (!csv) throw IoError("cannot write " + out);
  csv << "view,mean_clean,mean_metal\n" << std::setprecision(10);
  double excess = 0.0;
  for (std::size_t v = 0; v < clean.size(); ++v) {
    csv << v << ',' << clean[v] << ',' << metal[v] << '\n';
    excess += metal[v] - clean[v];
  }
  if (!csv) throw IoError("write failed: " + out);
  std::cout << clean.size() << " views; summed row-mean excess from metal " << excess << '\n';
  return kOk;
}

// ------------------------------------------------------------------ ablate

int cmd_ablate(const Common& common, const std::string& data, const std::string& out,
               const std::vector<std::uint64_t>& seeds) {
  const app::RunConfig rc = load_config(common);
  const auto train_set = train::load_pairs(data, "train"), test_set = train::load_pairs(data, "test");
  if (train_set.empty() || test_set.empty()) throw IoError("ablation needs train and test cases under " + data);
  fs::create_directories(out);
  std::ofstream runs(fs::path(out) / "ablation_runs.csv");
  runs << "arm,seed,final_bits_per_dim,psnr_db,ssim\n" << std::setprecision(10);
  const auto report = train::ablation_suite(rc.train, train_set, test_set, seeds, [&](const train::AblationRun& r) {
    double p = 0.0, s = 0.0;
    for (const auto& row : r.rows) {
      p += row.psnr_db;
      s += row.ssim;
    }
    const double n = static_cast<double>(r.rows.size());
    runs << r.arm << ',' << r.seed << ',' << r.final_bits_per_dim << ',' << p / n << ',' << s / n << std::endl;
    std::cout << std::left << std::setw(11) << r.arm << " seed " << r.seed << "  PSNR " << std::fixed
              << std::setprecision(2) << p / n << "  SSIM " << std::setprecision(4) << s / n << std::defaultfloat
              << std::endl;
  });
  eval::write_summary_csv(fs::path(out) / "ablation.csv", report.summary);
  std::cout << eval::format_summary(report.summary);
  return kOk;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kShape;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metal artifact reduction toolkit: CT simulation, classical baselines and RetinexFlow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "marflow 0.1");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only print warnings and errors from the library");
  app.footer("Exit codes: 0 success, 1 other failure, 2 config error, 3 training divergence, 4 shape error.\n"
             "MARFLOW_THREADS caps internal parallelism.");

  Common common;
  std::function<int()> action;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic metal-artifact dataset");
  std::string sim_out;
  Index sim_n = 40;
  std::uint64_t sim_seed = 1234;
  add_common(sim, common);
  sim->add_option("-o,--out", sim_out, "Output dataset directory")->required();
  sim->add_option("-n,--n", sim_n, "Number of cases (size classes assigned round-robin)")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Base seed")->capture_default_str();
  sim->callback([&] { action = [&] { return cmd_simulate(common, sim_out, sim_n, sim_seed); }; });

  auto* base = app.add_subcommand("baseline", "Run LI and/or NMAR and write li.pgm / nmar.pgm into case directories");
  std::vector<std::string> base_methods{"li", "nmar"}, base_cases;
  std::string base_data, base_split = "test";
  base->add_option("-m,--method", base_methods, "li, nmar or both")->delimiter(',')->capture_default_str();
  base->add_option("--case", base_cases, "Case directory (repeatable)");
  base->add_option("--data", base_data, "Dataset root; processes every case of --split");
  base->add_option("--split", base_split, "train or test")->capture_default_str();
  base->callback([&] { action = [&] { return cmd_baseline(base_methods, base_cases, base_data, base_split); }; });

  auto* tr = app.add_subcommand("train", "Train RetinexFlow on the train split");
  std::string tr_data, tr_out;
  add_common(tr, common);
  tr->add_option("--data", tr_data, "Dataset root")->required();
  tr->add_option("-o,--out", tr_out, "Run directory (checkpoints, model.rflw, loss.csv)")->required();
  tr->callback([&] { action = [&] { return cmd_train(common, tr_data, tr_out); }; });

  auto* inf = app.add_subcommand("infer", "Correct images with a trained model");
  std::string inf_ckpt, inf_in, inf_out, inf_data, inf_split = "test";
  double inf_tau = 0.0;
  std::uint64_t inf_seed = 0;
  inf->add_option("--ckpt", inf_ckpt, "Checkpoint (.rflw)")->required()->check(CLI::ExistingFile);
  inf->add_option("--in", inf_in, "Corrupted image (16-bit PGM, intensity = value / 65535)");
  inf->add_option("--out", inf_out, "Corrected image; the |difference| map goes to <stem>_diff.pgm");
  inf->add_option("--data", inf_data, "Dataset root; writes retinexflow.pgm into every case of --split");
  inf->add_option("--split", inf_split, "train or test")->capture_default_str();
  inf->add_option("--tau", inf_tau, "Latent temperature; 0 is deterministic")->capture_default_str();
  inf->add_option("--seed", inf_seed, "Latent sampling seed when tau > 0")->capture_default_str();
  inf->callback([&] {
    action = [&] { return cmd_infer(inf_ckpt, inf_in, inf_out, inf_data, inf_split, inf_tau, inf_seed); };
  });

  auto* ev = app.add_subcommand("eval", "Score method outputs against ground truth (metal excluded)");
  std::string ev_data, ev_out, ev_split = "test";
  std::vector<std::string> ev_methods{"li", "nmar", "retinexflow"};
  ev->add_option("--data", ev_data, "Dataset root")->required();
  ev->add_option("--methods", ev_methods, "Methods to score; the input row is always included")
      ->delimiter(',')
      ->capture_default_str();
  ev->add_option("-o,--out", ev_out, "Directory for metrics.csv and summary.csv")->required();
  ev->add_option("--split", ev_split, "train or test")->capture_default_str();
  ev->callback([&] { action = [&] { return cmd_eval(ev_data, ev_methods, ev_out, ev_split); }; });

  auto* st = app.add_subcommand("stats", "Per-view sinogram row means with and without metal");
  std::string st_case, st_out;
  st->add_option("--case", st_case, "Case directory")->required()->check(CLI::ExistingDirectory);
  st->add_option("-o,--out", st_out, "Output CSV")->required();
  st->callback([&] { action = [&] { return cmd_stats(st_case, st_out); }; });

  auto* ab = app.add_subcommand("ablate", "Train every ablation arm over several seeds");
  std::string ab_data, ab_out;
  std::vector<std::uint64_t> ab_seeds{1, 2, 3};
  add_common(ab, common);
  ab->add_option("--data", ab_data, "Dataset root")->required();
  ab->add_option("-o,--out", ab_out, "Output directory")->required();
  ab->add_option("--seeds", ab_seeds, "Training seeds")->delimiter(',')->capture_default_str();
  ab->callback([&] { action = [&] { return cmd_ablate(common, ab_data, ab_out, ab_seeds); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (quiet) log::set_level(log::Level::Warn);
  return run_guarded(action);
}
