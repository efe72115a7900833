#include <doctest.h>

#include <cstdlib>

#include "sldcnn/config.hpp"
#include "sldcnn/error.hpp"
#include "test_util.hpp"

using namespace sldcnn;

namespace {
RunConfig synth_config() {
  RunConfig c;
  c.set("synth", "true");
  c.set("arch", "8C3-2P2-16FC-10SM");
  return c;
}
}  // namespace

TEST_CASE("unknown keys are rejected") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("learning_rate", "1"), UsageError);
  CHECK_THROWS_AS(c.merge_text("bogus = 1\n", true), UsageError);
  CHECK_THROWS_AS(c.merge_text("no equals sign\n", true), UsageError);
}

TEST_CASE("config text merging") {
  RunConfig c;
  c.set("seed", "7");
  c.merge_text("# comment\nseed = 9\n  lrate1 = 0.02   # trailing\n\n", false);
  CHECK(c.get("seed") == "7");
  CHECK(c.get("lrate1") == "0.02");
  c.merge_text("seed = 9", true);
  CHECK(c.get("seed") == "9");
  CHECK(c.render() == "lrate1 = 0.02\nseed = 9\n");
}

TEST_CASE("setup presets expand unless overridden") {
  RunConfig c = synth_config();
  c.set("setup", "1");
  RunConfig r = resolve(c);
  CHECK(r.get("per_layer_iters") == "10");
  CHECK(r.get("fine_tune_iters") == "20");
  CHECK(r.get("dcnn_iters") == "50");

  c.set("setup", "2");
  c.set("fine_tune_iters", "3");
  r = resolve(c);
  CHECK(r.get("per_layer_iters") == "7");
  CHECK(r.get("fine_tune_iters") == "3");
  CHECK(r.get("dcnn_iters") == "28");

  c.set("setup", "3");
  CHECK_THROWS_AS(resolve(c), UsageError);
}

TEST_CASE("resolution fills defaults and validates") {
  const RunConfig r = resolve(synth_config());
  CHECK(r.values().size() == config_keys().size());
  CHECK(r.get("size") == "28");
  CHECK(r.get("batch_size") == "100");
  const TrainConfig t = train_config(r);
  CHECK(t.mode == TrainMode::kSlDcnn);
  CHECK(t.lrate1 == 0.01);
  CHECK(t.lrate2 == 0.001);
  CHECK(t.gamma == 0.9);
  CHECK(arch_spec(r).input.height == 28);
  CHECK(resolve(r).values() == r.values());

  auto rejects = [](const char* key, const char* value) {
    RunConfig c = synth_config();
    c.set(key, value);
    CHECK_THROWS_AS(resolve(c), UsageError);
  };
  rejects("mode", "both");
  rejects("batch_size", "0");
  rejects("batch_size", "-5");
  rejects("lrate1", "fast");
  rejects("lrate2", "0.5");
  rejects("arch", "10SM");
  rejects("arch", "64C4-4P2-64C4-4P2-64C4-4P2-1500FC-10SM");
  rejects("decay_unit", "week");
  rejects("resize", "cubic");
  rejects("synth.classes", "1");
  rejects("synth.test_fraction", "1");
  rejects("invert", "maybe");

  RunConfig nodata;
  CHECK_THROWS_AS(resolve(nodata), UsageError);
}

TEST_CASE("data-only resolution ignores the training keys") {
  RunConfig c;
  c.set("synth", "true");
  CHECK_THROWS_AS(resolve(c), UsageError);
  const RunConfig r = resolve(c, ResolveScope::kData);
  CHECK(preprocess_options(r).size == 28);
}

TEST_CASE("thread count from the environment") {
  ::setenv("SLDCNN_THREADS", "3", 1);
  CHECK(resolve(synth_config()).get("threads") == "3");
  RunConfig c = synth_config();
  c.set("threads", "2");
  CHECK(resolve(c).get("threads") == "2");
  ::unsetenv("SLDCNN_THREADS");
  CHECK(resolve(synth_config()).get("threads") == "1");
}

TEST_CASE("config files") {
  testutil::TempDir dir("cfg");
  testutil::spit(dir / "run.cfg", "synth = true\narch = 8C3-2P2-16FC-10SM\nseed = 4\n");
  RunConfig c;
  c.set("seed", "5");
  c.merge_file(dir / "run.cfg", false);
  const RunConfig r = resolve(c);
  CHECK(r.get("seed") == "5");
  CHECK_THROWS_AS(c.merge_file(dir / "absent.cfg", false), IoError);

  // the rendered resolution is itself a loadable config that resolves to itself
  testutil::spit(dir / "echo.cfg", r.render());
  RunConfig back;
  back.merge_file(dir / "echo.cfg", true);
  CHECK(resolve(back).values() == r.values());
}

TEST_CASE("synthetic data through the config") {
  RunConfig c = synth_config();
  c.set("synth.per_class", "5");
  c.set("synth.test_fraction", "0.2");
  const Split s = load_data(resolve(c));
  CHECK(s.train.size() == 40);
  CHECK(s.test.size() == 10);
}
