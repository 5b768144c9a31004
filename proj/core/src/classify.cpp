#include "gccn/classify.hpp"

#include <cmath>
#include <numeric>

#include "gccn/error.hpp"
#include "gccn/ops.hpp"
#include "stepper.hpp"

namespace gccn {

namespace {

constexpr std::uint64_t kHeadSeedSalt = 0x9e3779b97f4a7c15ULL;

std::size_t require_classes(const RunConfig& config) {
  if (config.num_classes < 2) throw ConfigError("classify: num_classes must be at least 2");
  return config.num_classes;
}

void require_shape(const RunConfig& config, const Dataset& dataset) {
  const EncoderConfig& e = config.encoder;
  if (dataset.image_shape() != Shape{e.input_height, e.input_width, e.input_channels}) {
    throw DimensionError("dataset images " + shape_string(dataset.image_shape()) + " do not match model input " +
                         shape_string({e.input_height, e.input_width, e.input_channels}));
  }
}

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(argmax(std::span<const double>(&logits[i * k], k))) == labels[i]) ++correct;
  }
  return correct;
}

}  // namespace

Classifier::Classifier(const RunConfig& config)
    : net_(config.encoder, config.gc), classes_(require_classes(config)) {}

void Classifier::init_params(ParameterSet& params, std::uint64_t seed) const {
  net_.init_params(params, seed);
  net_.reset_running_stats(params);
  const std::size_t in = net_.feature_size();
  Rng rng(seed ^ kHeadSeedSalt);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w(Shape{in, classes_});
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  params.add("head.fc.weight", std::move(w));
  params.add("head.fc.bias", Tensor(Shape{classes_}, 0.0));
}

Var Classifier::logits(Var images, ParameterSet& params, Mode mode) const {
  Var features = net_.embed(images, params, mode);
  Graph& g = images.graph();
  return linear(features, g.param(params.get("head.fc.weight")), g.param(params.get("head.fc.bias")));
}

ClassifyEvaluation evaluate(const Classifier& model, ParameterSet& params, const Dataset& dataset,
                            std::size_t batch_size) {
  if (dataset.size() == 0) throw DataError("evaluate: empty dataset");
  const std::size_t k = model.num_classes();
  ClassifyEvaluation out;
  out.confusion.assign(k, std::vector<std::size_t>(k, 0));
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t stop = std::min(dataset.size(), start + batch_size);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    std::vector<int> labels;
    for (auto i : idx) {
      if (dataset.labels[i] < 0 || static_cast<std::size_t>(dataset.labels[i]) >= k) {
        throw DataError("evaluate: label " + std::to_string(dataset.labels[i]) + " outside the model's " +
                        std::to_string(k) + " classes");
      }
      labels.push_back(dataset.labels[i]);
    }
    Graph g(false);
    Var logits = model.logits(g.constant(dataset.batch(idx)), params, Mode::eval);
    loss_sum += cross_entropy(logits, labels).value().item() * static_cast<double>(idx.size());
    const Tensor& z = logits.value();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::size_t p = argmax(std::span<const double>(&z[i * k], k));
      ++out.confusion[static_cast<std::size_t>(labels[i])][p];
      if (static_cast<int>(p) == labels[i]) ++correct;
    }
  }
  const double n = static_cast<double>(dataset.size());
  out.accuracy = static_cast<double>(correct) / n;
  out.loss = loss_sum / n;
  return out;
}

ClassifyEvaluation evaluate(const Checkpoint& checkpoint, const Dataset& dataset) {
  const RunConfig config = config_from_checkpoint(checkpoint);
  if (config.task != Task::classify) throw ConfigError("checkpoint was not trained as a classifier");
  require_shape(config, dataset);
  Classifier model(config);
  ParameterSet params = checkpoint.params;
  return evaluate(model, params, dataset, config.batch_size);
}

ClassifyResult train_classifier(const Dataset& train, const Dataset& heldout, const RunConfig& config, Rng& rng) {
  validate(config);
  require_shape(config, train);
  require_shape(config, heldout);
  if (train.size() == 0 || heldout.size() == 0) throw DataError("classify: empty train or heldout set");
  Classifier model(config);
  if (train.num_classes() > model.num_classes() || heldout.num_classes() > model.num_classes()) {
    throw DataError("classify: dataset has more classes than num_classes");
  }

  ClassifyResult result;
  ParameterSet& params = result.checkpoint.params;
  model.init_params(params, config.seed);
  detail::Stepper stepper(config);
  stepper.settle(params);

  auto heldout_row = [&](std::size_t epoch) {
    const ClassifyEvaluation ev = evaluate(model, params, heldout, config.batch_size);
    result.metrics.push_back({epoch, "heldout", ev.loss, ev.accuracy});
  };
  heldout_row(0);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      std::vector<int> labels;
      for (auto i : idx) labels.push_back(train.labels[i]);
      Graph g;
      Var logits = model.logits(g.constant(train.batch(idx)), params, Mode::train);
      Var loss = cross_entropy(logits, labels);
      params.zero_grad();
      g.backward(loss);
      stepper.step(params);
      loss_sum += loss.value().item() * static_cast<double>(idx.size());
      correct += count_correct(logits.value(), labels);
    }
    const double n = static_cast<double>(train.size());
    result.metrics.push_back({epoch, "train", loss_sum / n, static_cast<double>(correct) / n});
    heldout_row(epoch);
  }

  result.checkpoint.fingerprint = fingerprint(config);
  result.checkpoint.config_text = canonical(config);
  result.checkpoint.rng_state = rng.state();
  return result;
}

}  // namespace gccn
