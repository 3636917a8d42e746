#include <doctest.h>

#include <string>

#include "marflow/app/run_config.hpp"
#include "marflow/core/error.hpp"

using namespace marflow;
using marflow::app::parse_run_config;
using marflow::app::RunConfig;

TEST_CASE("run config: dotted keys reach every section") {
  RunConfig c = parse_run_config(
      "# desk run\n"
      "sim.image_size = 32\n"
      "model.steps = 6\n"
      "train.lr = 0.01\n"
      "train.batch_size = 2\n"
      "eval.tau = 0.5\n"
      "eval.split = train\n");
  CHECK(c.sim.image_size == 32);
  CHECK(c.train.model.steps == 6);
  CHECK(c.train.adam.lr == doctest::Approx(0.01));
  CHECK(c.train.batch_size == 2);
  CHECK(c.eval.tau == doctest::Approx(0.5));
  CHECK(c.eval.split == "train");
}

TEST_CASE("run config: text form parses back to the same config") {
  RunConfig c;
  c.set("train.seed", "9");
  c.set("model.hidden", "16");
  c.set("sim.n_views", "90");
  RunConfig back = parse_run_config(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.train.seed == 9);
  CHECK(back.train.model.hidden == 16);
}

TEST_CASE("run config: errors name the offending line") {
  auto message = [](const std::string& text) {
    try {
      parse_run_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("train.lr = 1e-3\nbogus.key = 1\n").rfind("line 2: ", 0) == 0);
  CHECK(message("train.batch_size = four\n").rfind("line 1: ", 0) == 0);
  CHECK_THROWS_AS(parse_run_config("eval.split = valid\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("train.batch_size = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("model.steps\n"), ConfigError);
}
