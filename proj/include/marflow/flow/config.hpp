#pragma once

#include <string>

namespace marflow::flow {

struct ModelConfig {
  int levels = 2;          // L
  int steps = 4;           // K flow steps per level
  int hidden = 32;         // c, coupling network width
  int blocks = 2;          // B residual-in-residual dense blocks
  int enc_width = 32;      // c_enc
  int growth = 8;          // dense-block growth channels
  int cond_channels = 32;  // c_cond
  bool feature_encoder = true;  // feed concat(X, N, S) instead of X alone
  bool freeze_invconv = true;
  // Model Y - X instead of Y. A unit-Jacobian shift, so the likelihood is
  // unchanged, but an untrained flow already reproduces the input.
  bool residual = true;

  static ModelConfig desk() { return {}; }
  static ModelConfig paper() {
    ModelConfig c;
    c.levels = 3;
    c.steps = 6;
    c.hidden = 64;
    return c;
  }

  // Sets one field from text; returns false for an unknown key and throws
  // ConfigError on a malformed value.
  bool set(const std::string& key, const std::string& value);
  // key=value lines, readable by from_text.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace marflow::flow
