#include "marflow/flow/config.hpp"

#include <charconv>
#include <sstream>

#include "marflow/core/error.hpp"
#include "marflow/core/keyvalue.hpp"

namespace marflow::flow {
namespace {

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) {
    throw ConfigError("model." + key + ": expected an integer, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("model." + key + ": expected true/false, got '" + value + "'");
}

}  // namespace

bool ModelConfig::set(const std::string& key, const std::string& value) {
  if (key == "levels") levels = parse_int(key, value);
  else if (key == "steps") steps = parse_int(key, value);
  else if (key == "hidden") hidden = parse_int(key, value);
  else if (key == "blocks") blocks = parse_int(key, value);
  else if (key == "enc_width") enc_width = parse_int(key, value);
  else if (key == "growth") growth = parse_int(key, value);
  else if (key == "cond_channels") cond_channels = parse_int(key, value);
  else if (key == "feature_encoder") feature_encoder = parse_bool(key, value);
  else if (key == "freeze_invconv") freeze_invconv = parse_bool(key, value);
  else if (key == "residual") residual = parse_bool(key, value);
  else return false;
  return true;
}

std::string ModelConfig::to_text() const {
  std::ostringstream s;
  s << "levels=" << levels << '\n'
    << "steps=" << steps << '\n'
    << "hidden=" << hidden << '\n'
    << "blocks=" << blocks << '\n'
    << "enc_width=" << enc_width << '\n'
    << "growth=" << growth << '\n'
    << "cond_channels=" << cond_channels << '\n'
    << "feature_encoder=" << (feature_encoder ? "true" : "false") << '\n'
    << "freeze_invconv=" << (freeze_invconv ? "true" : "false") << '\n'
    << "residual=" << (residual ? "true" : "false") << '\n';
  return s.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  std::istringstream in(text);
  ModelConfig c;
  for (const KeyValueLine& kv : parse_key_values(in)) {
    if (!c.set(kv.key, kv.value)) {
      throw ConfigError("line " + std::to_string(kv.line) + ": unknown model key '" + kv.key + "'");
    }
  }
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("model.") + name + " must be at least 1");
  };
  positive(levels, "levels");
  positive(steps, "steps");
  positive(hidden, "hidden");
  positive(enc_width, "enc_width");
  positive(growth, "growth");
  positive(cond_channels, "cond_channels");
  if (blocks < 0) throw ConfigError("model.blocks must be non-negative");
  if (levels > 6) throw ConfigError("model.levels must be at most 6");
}

}  // namespace marflow::flow
