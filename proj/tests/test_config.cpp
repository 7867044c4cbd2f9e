#include "doctest.h"
#include "test_support.hpp"
#include "ursa/config.hpp"

using namespace ursa;

TEST_CASE("defaults") {
  const TrainConfig c;
  CHECK(c.measure == Measure::gaussian);
  CHECK(c.sigma == 0.1);
  CHECK(c.lambda == 10.0);
  CHECK(c.dropout_rate == 0.3);
  CHECK(c.augmentation.rotation_std == 0.06);
  CHECK(c.augmentation.rotation_clip == 0.18);
  CHECK(c.augmentation.jitter_std == 0.01);
  CHECK(c.augmentation.jitter_clip == 0.05);
  CHECK(c.augmentation.scale_lo == 0.8);
  CHECK(c.augmentation.scale_hi == 1.25);
  CHECK(c.augmentation.shift_range == 0.1);
}

TEST_CASE("text round trip is exact") {
  TrainConfig c;
  c.measure = Measure::minimum;
  c.stars = 77;
  c.sigma = 0.1 + 1e-17;
  c.learning_rate = 3.3e-4;
  c.optimizer = OptimizerKind::sgd;
  c.seed = 0xdeadbeefcafeULL;
  c.augmentation.enabled = false;
  c.augmentation.jitter_std = 0.0123456789012345;
  c.snapshot_epochs = {0, 5, 7};
  c.precision = Precision::f64;
  const auto text = to_config_text(c);
  const auto back = parse_config_text(text);
  CHECK(to_config_text(back) == text);
  CHECK(back.measure == Measure::minimum);
  CHECK(back.stars == 77);
  CHECK(back.learning_rate == 3.3e-4);
  CHECK(back.seed == 0xdeadbeefcafeULL);
  CHECK_FALSE(back.augmentation.enabled);
  CHECK(back.augmentation.jitter_std == c.augmentation.jitter_std);
  CHECK(back.snapshot_epochs == c.snapshot_epochs);
  CHECK(back.precision == Precision::f64);
  CHECK(back.optimizer == OptimizerKind::sgd);
}

TEST_CASE("comments, blanks and overrides") {
  const auto c = parse_config_text("# run\n\nstars = 32\nmeasure=exponential  # trailing\n");
  CHECK(c.stars == 32);
  CHECK(c.measure == Measure::exponential);
  CHECK(config_value(c, "stars") == "32");
}

TEST_CASE("bad keys and values") {
  CHECK_THROWS_AS(parse_config_text("starz=3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("stars=3\nstars=4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("stars=abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("stars\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("sigma=-1\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config_text("measure=cosine\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("optimizer=rmsprop\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("precision=f16\n"), ConfigError);
  TrainConfig c;
  CHECK_THROWS_AS(apply_config_value(c, "nope", "1"), ConfigError);
  CHECK_THROWS_AS(config_value(c, "nope"), ConfigError);
}

TEST_CASE("count lists") {
  CHECK(parse_count_list("32,64,128", "m") == std::vector<std::size_t>{32, 64, 128});
  CHECK(parse_count_list("5", "m") == std::vector<std::size_t>{5});
  CHECK_THROWS_AS(parse_count_list("32,32", "m"), ConfigError);
  CHECK_THROWS_AS(parse_count_list("", "m"), ConfigError);
  CHECK_THROWS_AS(parse_count_list("3,x", "m"), ConfigError);
}

TEST_CASE("config file") {
  testing::TempDir dir("cfg");
  const auto path = dir / "run.cfg";
  const std::string text = "epochs=3\nbatch=8\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  const auto c = load_config_file(path);
  CHECK(c.epochs == 3);
  CHECK(c.batch_size == 8);
  CHECK_THROWS(load_config_file(dir / "missing.cfg"));
}

TEST_CASE("every key is readable and writable") {
  TrainConfig c;
  for (const auto& key : config_keys()) {
    const auto value = config_value(c, key.name);
    CHECK_NOTHROW(apply_config_value(c, key.name, value));
  }
  CHECK(to_config_text(c) == to_config_text(TrainConfig{}));
}
