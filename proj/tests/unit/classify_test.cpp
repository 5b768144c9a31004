#include <gtest/gtest.h>

#include <numeric>

#include "gccn/classify.hpp"
#include "gccn/config.hpp"
#include "gccn/error.hpp"
#include "gccn/optim.hpp"
#include "gccn/rng.hpp"
#include "gccn/trainer.hpp"

namespace gccn {
namespace {

// Class 0 all dark, class 1 all bright, with small pixel noise.
Dataset bright_dark(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.height = d.width = 16;
  d.class_names = {"dark", "bright"};
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Tensor img(Shape{16, 16, 1});
      for (auto& v : img.data()) v = (c == 0 ? 0.1 : 0.9) + rng.uniform(-0.05, 0.05);
      d.images.push_back(img);
      d.labels.push_back(c);
    }
  }
  return d;
}

RunConfig small_config(const Dataset& d) {
  RunConfig c;
  c.task = Task::classify;
  c.encoder.num_blocks = 2;
  c.encoder.filters_per_block = 4;
  c.gc.grid_rows = c.gc.grid_cols = 2;
  c.batch_size = 4;
  c.learning_rate = 1e-2;
  c.epochs = 3;
  fit_to_dataset(c, d);
  validate(c);
  return c;
}

TEST(Classify, TrivialTaskReachesPerfectHeldout) {
  const Dataset d = bright_dark(20, 1);
  const RunConfig c = small_config(d);
  Rng rng(c.seed);
  const auto [train, held] = split_holdout(d, c.holdout_fraction, rng);
  const ClassifyResult r = train_classifier(train, held, c, rng);
  ASSERT_EQ(r.metrics.size(), 1u + 2u * 3u);
  EXPECT_EQ(r.metrics.back().split, "heldout");
  EXPECT_EQ(r.metrics.back().accuracy, 1.0);

  const ClassifyEvaluation on_train = evaluate(r.checkpoint, train);
  EXPECT_EQ(on_train.accuracy, 1.0);
  std::size_t trace = 0;
  for (std::size_t k = 0; k < 2; ++k) {
    trace += on_train.confusion[k][k];
    EXPECT_EQ(std::accumulate(on_train.confusion[k].begin(), on_train.confusion[k].end(), std::size_t{0}), 16u);
  }
  EXPECT_DOUBLE_EQ(on_train.accuracy, static_cast<double>(trace) / static_cast<double>(train.size()));
}

TEST(Classify, ShuffledLabelsScoreNearChance) {
  const Dataset d = bright_dark(20, 2);
  const RunConfig c = small_config(d);
  Rng rng(c.seed);
  const auto [train, held] = split_holdout(d, c.holdout_fraction, rng);
  const ClassifyResult r = train_classifier(train, held, c, rng);
  Dataset shuffled = d;
  Rng perm(3);
  perm.shuffle(shuffled.labels);
  const double acc = evaluate(r.checkpoint, shuffled).accuracy;
  // 40 samples: 3 sigma around 0.5 is about 0.24.
  EXPECT_GT(acc, 0.26);
  EXPECT_LT(acc, 0.74);
}

TEST(Classify, ZeroEpochsGivesInitialCheckpoint) {
  const Dataset d = bright_dark(10, 4);
  RunConfig c = small_config(d);
  c.epochs = 0;
  Rng rng(c.seed);
  const auto [train, held] = split_holdout(d, c.holdout_fraction, rng);
  const ClassifyResult r = train_classifier(train, held, c, rng);
  const Classifier model(c);
  ParameterSet fresh;
  model.init_params(fresh, c.seed);
  for (const auto& p : fresh) {
    if (p.trainable) EXPECT_EQ(r.checkpoint.params.get(p.name).value, p.value) << p.name;
  }
  ASSERT_EQ(r.metrics.size(), 1u);
  EXPECT_EQ(r.metrics[0].epoch, 0u);
}

TEST(Classify, SameSeedSameCheckpoint) {
  const Dataset d = bright_dark(10, 5);
  RunConfig c = small_config(d);
  c.epochs = 2;
  const auto run = [&] {
    Rng rng(c.seed);
    const auto [train, held] = split_holdout(d, c.holdout_fraction, rng);
    return train_classifier(train, held, c, rng);
  };
  const ClassifyResult a = run(), b = run();
  EXPECT_TRUE(a.checkpoint.params == b.checkpoint.params);
  EXPECT_EQ(a.checkpoint.rng_state, b.checkpoint.rng_state);
  EXPECT_EQ(a.checkpoint.fingerprint, fingerprint(c));
  for (std::size_t i = 0; i < a.metrics.size(); ++i) EXPECT_EQ(a.metrics[i].loss, b.metrics[i].loss);
}

TEST(Classify, FirstStepDoesNotIncreaseLoss) {
  const Dataset d = bright_dark(8, 6);
  const RunConfig c = small_config(d);
  const Classifier model(c);
  std::vector<std::size_t> all(d.size());
  std::iota(all.begin(), all.end(), 0);
  const Tensor batch = d.batch(all);
  int failures = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ParameterSet p;
    model.init_params(p, seed);
    const auto loss = [&] {
      Graph g;
      Var l = cross_entropy(model.logits(g.constant(batch), p, Mode::train), d.labels);
      p.zero_grad();
      g.backward(l);
      return l.value().item();
    };
    const double before = loss();
    Adam adam(AdamOptions{1e-3});
    adam.step(p);
    const double after = loss();
    failures += after > before;
  }
  EXPECT_LE(failures, 1);
}

TEST(Classify, ShapeMismatchRejected) {
  const Dataset d = bright_dark(10, 7);
  RunConfig c = small_config(d);
  c.epochs = 0;
  Rng rng(c.seed);
  const auto [train, held] = split_holdout(d, c.holdout_fraction, rng);
  const ClassifyResult r = train_classifier(train, held, c, rng);
  Dataset other = d;
  other.height = other.width = 20;
  for (auto& img : other.images) img = Tensor(Shape{20, 20, 1}, 0.5);
  EXPECT_THROW(evaluate(r.checkpoint, other), DimensionError);
}

TEST(Classify, FewerThanTwoClassesRejected) {
  const Dataset d = bright_dark(4, 8);
  RunConfig c = small_config(d);
  c.num_classes = 1;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, CanonicalRoundTrip) {
  RunConfig c;
  c.seed = 42;
  c.learning_rate = 0.1 + 0.2;
  c.gc.mode = FusionMode::norm;
  c.head.head = Head::matching;
  c.head.metric = Metric::cosine;
  c.precision = Precision::f32;
  const RunConfig back = parse_config(canonical(c));
  EXPECT_EQ(canonical(back), canonical(c));
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(fingerprint(back), fingerprint(c));
  EXPECT_EQ(fingerprint(c).substr(0, 4), "f32:");
}

TEST(Config, FileGrammar) {
  const RunConfig c = parse_config("# comment\n\nseed = 7   # trailing\n  gc.mode=aug\nways = 3\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.gc.mode, FusionMode::aug);
  EXPECT_EQ(c.ways, 3u);
  EXPECT_THROW(parse_config("nonsense = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("seed = x\n"), ConfigError);
  EXPECT_THROW(parse_config("seed\n"), ConfigError);
}

TEST(Config, PathsDoNotChangeFingerprint) {
  RunConfig a, b;
  b.data = "elsewhere";
  b.out = "other";
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  b.seed = 2;
  EXPECT_NE(fingerprint(a), fingerprint(b));
}

TEST(Config, Validation) {
  RunConfig c;
  c.encoder.input_height = c.encoder.input_width = 28;
  c.encoder.num_blocks = 4;
  EXPECT_THROW(validate(c), ConfigError);
  c.encoder.num_blocks = 3;
  c.gc.grid_rows = c.gc.grid_cols = 1;
  EXPECT_NO_THROW(validate(c));
  c.ways = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c.ways = 5;
  c.train_fraction = 1.0;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, FitToDataset) {
  const Dataset d = bright_dark(2, 9);
  RunConfig c;
  c.task = Task::classify;
  fit_to_dataset(c, d);
  EXPECT_EQ(c.encoder.input_height, 16u);
  EXPECT_EQ(c.num_classes, 2u);
  c.encoder.input_width = 17;
  EXPECT_THROW(fit_to_dataset(c, d), DimensionError);
}

TEST(Metrics, Summary) {
  const std::vector<double> v{1, 2, 3, 4};
  const Summary s = summarize(v);
  EXPECT_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.stderr_mean, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(summarize(std::vector<double>{0.7}).stderr_mean, 0.0);
}

}  // namespace
}  // namespace gccn
