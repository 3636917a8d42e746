#pragma once

#include <filesystem>
#include <string>

#include "marflow/ct/dataset.hpp"
#include "marflow/train/trainer.hpp"

namespace marflow::app {

struct EvalConfig {
  double tau = 0.0;
  std::string split = "test";
};

// Everything a command can be configured with. Keys are "section.name":
// sim.*, model.*, train.*, eval.*.
struct RunConfig {
  ct::SimulationConfig sim;
  train::TrainConfig train;
  EvalConfig eval;

  // Applies one key; throws ConfigError for unknown keys and bad values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  // Every key with its current value, one "key = value" line each.
  std::string to_text() const;
};

// Defaults overridden by the file's lines; errors name the line.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text);

}  // namespace marflow::app
