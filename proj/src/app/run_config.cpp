#include "marflow/app/run_config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "marflow/core/keyvalue.hpp"

namespace marflow::app {
namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) {
    throw ConfigError(key + ": cannot parse '" + value + "' as a number");
  }
  return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw ConfigError(key + ": empty list entry");
    out.push_back(parse_number<double>(key, item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  return s.str();
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  const std::string section = key.substr(0, dot), name = dot == std::string::npos ? "" : key.substr(dot + 1);
  bool known = true;
  if (section == "sim") {
    if (name == "image_size") sim.image_size = parse_number<Index>(key, value);
    else if (name == "pixel_size") sim.pixel_size = parse_number<double>(key, value);
    else if (name == "n_views") sim.n_views = parse_number<Index>(key, value);
    else if (name == "energies_kev") sim.spectrum.energies_kev = parse_list(key, value);
    else if (name == "weights") sim.spectrum.weights = parse_list(key, value);
    else if (name == "mu_metal") sim.mu_metal = parse_number<double>(key, value);
    else if (name == "window_hi") sim.window_hi = parse_number<double>(key, value);
    else if (name == "test_fraction") sim.test_fraction = parse_number<double>(key, value);
    else known = false;
  } else if (section == "model") {
    known = train.model.set(name, value);
  } else if (section == "train") {
    if (name == "epochs") train.epochs = parse_number<int>(key, value);
    else if (name == "max_steps") train.max_steps = parse_number<int>(key, value);
    else if (name == "batch_size") train.batch_size = parse_number<int>(key, value);
    else if (name == "seed") train.seed = parse_number<std::uint64_t>(key, value);
    else if (name == "lr") train.adam.lr = parse_number<double>(key, value);
    else if (name == "beta1") train.adam.beta1 = parse_number<double>(key, value);
    else if (name == "beta2") train.adam.beta2 = parse_number<double>(key, value);
    else if (name == "eps") train.adam.eps = parse_number<double>(key, value);
    else if (name == "grad_clip") train.grad_clip = parse_number<double>(key, value);
    else if (name == "dequantization") train.dequantization = parse_number<double>(key, value);
    else if (name == "checkpoint_every") train.checkpoint_every = parse_number<int>(key, value);
    else known = false;
  } else if (section == "eval") {
    if (name == "tau") eval.tau = parse_number<double>(key, value);
    else if (name == "split") eval.split = value;
    else known = false;
  } else {
    known = false;
  }
  if (!known) throw ConfigError("unknown key '" + key + "'");
}

void RunConfig::validate() const {
  if (sim.image_size < 32) throw ConfigError("sim.image_size must be at least 32");
  if (!(sim.pixel_size > 0.0)) throw ConfigError("sim.pixel_size must be positive");
  if (!(sim.window_hi > 0.0)) throw ConfigError("sim.window_hi must be positive");
  if (!(sim.test_fraction >= 0.0 && sim.test_fraction < 1.0)) throw ConfigError("sim.test_fraction must be in [0, 1)");
  if (!(sim.mu_metal > 0.0)) throw ConfigError("sim.mu_metal must be positive");
  if (sim.spectrum.energies_kev.size() != sim.spectrum.weights.size()) {
    throw ConfigError("sim.energies_kev and sim.weights differ in length");
  }
  sim.spectrum.validate(sim.mu_metal);
  sim.geometry().validate();
  train.validate();
  if (eval.split != "train" && eval.split != "test") throw ConfigError("eval.split must be train or test");
  if (eval.tau < 0.0) throw ConfigError("eval.tau must be non-negative");
}

std::string RunConfig::to_text() const {
  std::ostringstream s;
  s << std::setprecision(10);
  s << "sim.image_size = " << sim.image_size << '\n'
    << "sim.pixel_size = " << sim.pixel_size << '\n'
    << "sim.n_views = " << sim.n_views << '\n'
    << "sim.energies_kev = " << join(sim.spectrum.energies_kev) << '\n'
    << "sim.weights = " << join(sim.spectrum.weights) << '\n'
    << "sim.mu_metal = " << sim.mu_metal << '\n'
    << "sim.window_hi = " << sim.window_hi << '\n'
    << "sim.test_fraction = " << sim.test_fraction << '\n';
  std::istringstream model(train.model.to_text());
  std::string line;
  while (std::getline(model, line)) {
    const auto eq = line.find('=');
    s << "model." << line.substr(0, eq) << " = " << line.substr(eq + 1) << '\n';
  }
  s << "train.epochs = " << train.epochs << '\n'
    << "train.max_steps = " << train.max_steps << '\n'
    << "train.batch_size = " << train.batch_size << '\n'
    << "train.seed = " << train.seed << '\n'
    << "train.lr = " << train.adam.lr << '\n'
    << "train.beta1 = " << train.adam.beta1 << '\n'
    << "train.beta2 = " << train.adam.beta2 << '\n'
    << "train.eps = " << train.adam.eps << '\n'
    << "train.grad_clip = " << train.grad_clip << '\n'
    << "train.dequantization = " << train.dequantization << '\n'
    << "train.checkpoint_every = " << train.checkpoint_every << '\n'
    << "eval.tau = " << eval.tau << '\n'
    << "eval.split = " << eval.split << '\n';
  return s.str();
}

RunConfig parse_run_config(const std::string& text) {
  std::istringstream in(text);
  RunConfig c;
  for (const KeyValueLine& kv : parse_key_values(in)) {
    try {
      c.set(kv.key, kv.value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(kv.line) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  try {
    return parse_run_config(s.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace marflow::app
