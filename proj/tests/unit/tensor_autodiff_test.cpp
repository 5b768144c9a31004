#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gccn/autodiff.hpp"
#include "gccn/checks.hpp"
#include "gccn/error.hpp"
#include "gccn/grad_check.hpp"
#include "gccn/ops.hpp"
#include "gccn/oracles.hpp"
#include "gccn/rng.hpp"

namespace gccn {
namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

BatchNormBuffers bind(ParameterSet& p, std::size_t c) {
  p.add("rm", Tensor(Shape{c}, 0.0), false);
  p.add("rv", Tensor(Shape{c}, 1.0), false);
  p.add("ready", Tensor::scalar(0.0), false);
  return {&p.get("rm"), &p.get("rv"), &p.get("ready")};
}

TEST(Tensor, ShapeAndIndexing) {
  Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  t.at({1, 2}) = 7.0;
  EXPECT_EQ(t[5], 7.0);
  EXPECT_THROW(t.at({2, 0}), DimensionError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>(3)), DimensionError);
  EXPECT_THROW(t.reshaped(Shape{4}), DimensionError);
  EXPECT_EQ(t.reshaped(Shape{3, 2}).values(), t.values());
}

TEST(Conv2d, AllOnesSumsFour) {
  Graph g;
  const Var y = conv2d(g.constant(Tensor(Shape{3, 3, 1}, 1.0)), g.constant(Tensor(Shape{2, 2, 1, 1}, 1.0)));
  EXPECT_EQ(y.shape(), (Shape{2, 2, 1}));
  for (double v : y.value().data()) EXPECT_EQ(v, 4.0);
}

TEST(Conv2d, DegenerateProduct) {
  Graph g;
  const Var y = conv2d(g.constant(Tensor(Shape{1, 1, 1}, 0.37)), g.constant(Tensor(Shape{1, 1, 1, 1}, -2.5)));
  EXPECT_EQ(y.value().item(), 0.37 * -2.5);
}

TEST(Conv2d, MatchesLoopOracleBitwise) {
  Rng rng(3);
  const Tensor x = random_tensor(Shape{5, 5, 2}, rng);
  const Tensor k = random_tensor(Shape{3, 3, 2, 4}, rng);
  Graph g;
  const Var y = conv2d(g.constant(x), g.constant(k));
  const oracle::Map ref = oracle::conv2d({5, 5, 2, x.values()}, k.values(), 3, 3, 4, 1);
  ASSERT_EQ(y.value().size(), ref.v.size());
  for (std::size_t i = 0; i < ref.v.size(); ++i) EXPECT_EQ(y.value()[i], ref.v[i]) << i;
}

TEST(Conv2d, StrideAndErrors) {
  Rng rng(4);
  const Tensor x = random_tensor(Shape{7, 7, 3}, rng);
  const Tensor k = random_tensor(Shape{3, 3, 3, 2}, rng);
  Graph g;
  const Var y = conv2d(g.constant(x), g.constant(k), 2);
  const oracle::Map ref = oracle::conv2d({7, 7, 3, x.values()}, k.values(), 3, 3, 2, 2);
  EXPECT_EQ(y.shape(), (Shape{3, 3, 2}));
  EXPECT_EQ(y.value().values(), ref.v);
  EXPECT_THROW(conv2d(g.constant(x), g.constant(k), 0), ConfigError);
  EXPECT_THROW(conv2d(g.constant(x), g.constant(Tensor(Shape{3, 3, 2, 2}))), DimensionError);
}

TEST(MaxPool, WindowMax) {
  Graph g;
  const Var y = maxpool2d(g.constant(Tensor(Shape{2, 2, 1}, {1, 2, 3, 4})));
  EXPECT_EQ(y.value().values(), std::vector<double>{4});
}

TEST(MaxPool, ConstantMapHalvesResolution) {
  Graph g;
  const Var y = maxpool2d(g.constant(Tensor(Shape{6, 4, 2}, 0.75)));
  EXPECT_EQ(y.shape(), (Shape{3, 2, 2}));
  for (double v : y.value().data()) EXPECT_EQ(v, 0.75);
}

TEST(MaxPool, MatchesLoopOracle) {
  Rng rng(5);
  const Tensor x = random_tensor(Shape{8, 8, 3}, rng);
  Graph g;
  const Var y = maxpool2d(g.constant(x));
  EXPECT_EQ(y.value().values(), oracle::maxpool2x2({8, 8, 3, x.values()}).out.v);
}

TEST(MaxPool, OddDimsRejected) {
  Graph g;
  EXPECT_THROW(maxpool2d(g.constant(Tensor(Shape{3, 4, 1}))), DimensionError);
}

TEST(MaxPool, GradientGoesToFirstMaximum) {
  ParameterSet p;
  p.add("x", Tensor(Shape{2, 2, 1}, {5, 5, 1, 5}));
  Graph g;
  g.backward(sum(maxpool2d(g.param(p.get("x")))));
  EXPECT_EQ(p.get("x").grad.values(), (std::vector<double>{1, 0, 0, 0}));
}

TEST(BatchNorm, IdenticalRowsGiveZero) {
  ParameterSet p;
  const auto buffers = bind(p, 2);
  Graph g;
  const Tensor x(Shape{4, 2}, {3, -1, 3, -1, 3, -1, 3, -1});
  const Var y = batchnorm(g.constant(x), g.constant(Tensor(Shape{2}, 1.0)), g.constant(Tensor(Shape{2}, 0.0)),
                          buffers, Mode::train);
  for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, UnitBatchIsAlmostUnchanged) {
  ParameterSet p;
  const auto buffers = bind(p, 1);
  Graph g;
  const double eps = 1e-5;
  const Var y = batchnorm(g.constant(Tensor(Shape{2, 1}, {-1, 1})), g.constant(Tensor(Shape{1}, 1.0)),
                          g.constant(Tensor(Shape{1}, 0.0)), buffers, Mode::train, {eps, 0.1});
  const double expected = 1.0 / std::sqrt(1.0 + eps);
  EXPECT_DOUBLE_EQ(y.value()[0], -expected);
  EXPECT_DOUBLE_EQ(y.value()[1], expected);
}

TEST(BatchNorm, RandomBatchIsStandardised) {
  Rng rng(6);
  ParameterSet p;
  const auto buffers = bind(p, 3);
  Graph g;
  const Tensor x = random_tensor(Shape{64, 3}, rng, -4.0, 9.0);
  const Var y = batchnorm(g.constant(x), g.constant(Tensor(Shape{3}, 1.0)), g.constant(Tensor(Shape{3}, 0.0)),
                          buffers, Mode::train);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < 64; ++r) m += y.value()[r * 3 + c];
    m /= 64.0;
    double v = 0.0;
    for (std::size_t r = 0; r < 64; ++r) v += (y.value()[r * 3 + c] - m) * (y.value()[r * 3 + c] - m);
    v /= 64.0;
    EXPECT_LE(std::fabs(m), 1e-9);
    EXPECT_NEAR(v, 1.0, 1e-6);
  }
}

TEST(BatchNorm, EvalBeforeStatisticsIsStateError) {
  ParameterSet p;
  const auto buffers = bind(p, 1);
  Graph g;
  EXPECT_THROW(batchnorm(g.constant(Tensor(Shape{2, 1}, {0, 1})), g.constant(Tensor(Shape{1}, 1.0)),
                         g.constant(Tensor(Shape{1}, 0.0)), buffers, Mode::eval),
               StateError);
  reset_running_stats(buffers);
  EXPECT_NO_THROW(batchnorm(g.constant(Tensor(Shape{2, 1}, {0, 1})), g.constant(Tensor(Shape{1}, 1.0)),
                            g.constant(Tensor(Shape{1}, 0.0)), buffers, Mode::eval));
}

TEST(Activations, ReluAndSoftmax) {
  Graph g;
  EXPECT_EQ(relu(g.constant(Tensor::vector({-1, 0, 2}))).value().values(), (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(softmax(g.constant(Tensor::vector({0, 0}))).value().values(), (std::vector<double>{0.5, 0.5}));
}

TEST(Loss, LabelOutOfRangeIsDataError) {
  Graph g;
  const std::vector<int> labels{3};
  EXPECT_THROW(cross_entropy(g.constant(Tensor(Shape{1, 3})), labels), DataError);
}

TEST(Loss, CrossEntropyMatchesClosedForm) {
  Graph g;
  const std::vector<int> labels{1, 0};
  const Tensor z(Shape{2, 3}, {1, 2, 3, 0, 0, 0});
  const double row0 = -(2.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  const double row1 = std::log(3.0);
  EXPECT_NEAR(cross_entropy(g.constant(z), labels).value().item(), (row0 + row1) / 2.0, 1e-15);
}

TEST(Backward, SumGivesOnes) {
  ParameterSet p;
  p.add("theta", Tensor(Shape{2, 3}, 0.4));
  Graph g;
  g.backward(sum(g.param(p.get("theta"))));
  for (double v : p.get("theta").grad.data()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, SecondCallRejected) {
  ParameterSet p;
  p.add("theta", Tensor(Shape{2}, 0.4));
  Graph g;
  const Var loss = sum(g.param(p.get("theta")));
  g.backward(loss);
  EXPECT_THROW(g.backward(loss), UsageError);
}

TEST(Backward, NonScalarLossRejected) {
  ParameterSet p;
  p.add("theta", Tensor(Shape{2}, 0.4));
  Graph g;
  EXPECT_THROW(g.backward(g.param(p.get("theta"))), UsageError);
}

TEST(Backward, GradientsAccumulateOverReuse) {
  ParameterSet p;
  p.add("x", Tensor::vector({2.0, -3.0}));
  Graph g;
  const Var x = g.param(p.get("x"));
  g.backward(sum(mul(x, x)));
  EXPECT_EQ(p.get("x").grad.values(), (std::vector<double>{4.0, -6.0}));
}

TEST(Backward, FrozenGraphRecordsNoGradient) {
  ParameterSet p;
  p.add("x", Tensor::vector({2.0}));
  Graph g(false);
  const Var x = g.param(p.get("x"));
  EXPECT_FALSE(g.requires_grad(x));
}

TEST(GradCheck, IdentityIsExact) {
  for (double x : {0.3, -0.2, 1.1, 0.0, 123.456}) {
    ParameterSet p;
    p.add("x", Tensor::scalar(x));
    const auto report = grad_check([&](Graph& g) { return g.param(p.get("x")); }, p);
    EXPECT_TRUE(report.passed);
    EXPECT_EQ(report.max_rel_error, 0.0) << x;
  }
}

TEST(GradCheck, ConvPoolLinearPipeline) {
  Rng rng(7);
  ParameterSet p;
  p.add("k", random_tensor(Shape{3, 3, 1, 2}, rng));
  p.add("w", random_tensor(Shape{8, 3}, rng));
  p.add("b", random_tensor(Shape{3}, rng));
  const Tensor x = random_tensor(Shape{2, 6, 6, 1}, rng);
  const std::vector<int> labels{2, 0};
  const auto loss = [&](Graph& g) {
    Var h = maxpool2d(conv2d(g.constant(x), g.param(p.get("k"))));
    h = reshape(h, Shape{2, 8});
    return cross_entropy(linear(h, g.param(p.get("w")), g.param(p.get("b"))), labels);
  };
  const auto report = grad_check(loss, p, 1e-5, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(GradCheck, CorruptedBackwardIsFlagged) {
  Rng rng(8);
  ParameterSet p;
  p.add("k", random_tensor(Shape{2, 2, 1, 1}, rng));
  const Tensor x = random_tensor(Shape{4, 4, 1}, rng);
  const auto loss = [&](Graph& g) {
    return checks::corrupt(sum(conv2d(g.constant(x), g.param(p.get("k")))), 1.01);
  };
  EXPECT_FALSE(grad_check(loss, p).passed);
}

TEST(Suites, GradientSuitePasses) {
  const auto results = checks::gradient_suite();
  for (const auto& r : results) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Suites, GradientSuiteCatchesInjectedFault) {
  checks::SuiteOptions options;
  options.inject_fault = true;
  options.instances = 2;
  for (const auto& r : checks::gradient_suite(options)) EXPECT_FALSE(r.passed) << r.name;
}

TEST(Suites, OracleSuitePasses) {
  for (const auto& r : checks::oracle_suite()) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Suites, InvariantSuitePasses) {
  for (const auto& r : checks::invariant_suite()) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

}  // namespace
}  // namespace gccn
