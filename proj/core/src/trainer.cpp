#include "gccn/trainer.hpp"

#include "gccn/error.hpp"
#include "stepper.hpp"

namespace gccn {

namespace {

void require_episode_data(const Dataset& dataset, const RunConfig& config, const char* split) {
  const auto by_class = dataset.indices_by_class();
  if (by_class.size() < config.ways) {
    throw DataError(std::string(split) + " split has " + std::to_string(by_class.size()) + " classes, fewer than " +
                    std::to_string(config.ways) + " ways");
  }
  if (dataset.image_shape() !=
      Shape{config.encoder.input_height, config.encoder.input_width, config.encoder.input_channels}) {
    throw DimensionError(std::string(split) + " images " + shape_string(dataset.image_shape()) +
                         " do not match the model input");
  }
}

}  // namespace

FewshotEvaluation evaluate_fewshot(const GccnNet& net, ParameterSet& params, const Dataset& dataset,
                                   const RunConfig& config, std::size_t episodes, Rng& rng) {
  if (episodes == 0) throw ConfigError("episode count must be at least 1");
  require_episode_data(dataset, config, "evaluation");
  const auto by_class = dataset.indices_by_class();
  FewshotEvaluation out;
  std::vector<double> accuracies;
  double loss_sum = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    const Episode episode = sample_episode(by_class, config.ways, config.shots, config.queries, rng);
    Graph g(false);
    const HeadOutput h = episode_loss(g, dataset, episode, net, params, config.head, Mode::eval);
    const double loss = h.loss.value().item();
    out.episodes.push_back({e, loss, h.accuracy});
    accuracies.push_back(h.accuracy);
    loss_sum += loss;
  }
  out.accuracy = summarize(accuracies);
  out.mean_loss = loss_sum / static_cast<double>(episodes);
  return out;
}

FewshotResult train_fewshot(const Dataset& train, const Dataset& test, const RunConfig& config, Rng& rng) {
  validate(config);
  require_episode_data(train, config, "train");
  require_episode_data(test, config, "test");
  const GccnNet net(config.encoder, config.gc);

  FewshotResult result;
  ParameterSet& params = result.checkpoint.params;
  net.init_params(params, config.seed);
  net.reset_running_stats(params);
  detail::Stepper stepper(config);
  stepper.settle(params);

  const auto by_class = train.indices_by_class();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0, acc_sum = 0.0;
    for (std::size_t e = 0; e < config.episodes_per_epoch; ++e) {
      const Episode episode = sample_episode(by_class, config.ways, config.shots, config.queries, rng);
      Graph g;
      const HeadOutput h = episode_loss(g, train, episode, net, params, config.head, Mode::train);
      params.zero_grad();
      g.backward(h.loss);
      stepper.step(params);
      loss_sum += h.loss.value().item();
      acc_sum += h.accuracy;
    }
    const double n = static_cast<double>(config.episodes_per_epoch);
    result.metrics.push_back({epoch, "train", loss_sum / n, acc_sum / n});
  }

  result.checkpoint.fingerprint = fingerprint(config);
  result.checkpoint.config_text = canonical(config);
  result.checkpoint.rng_state = rng.state();

  result.evaluation = evaluate_fewshot(net, params, test, config, config.eval_episodes, rng);
  result.metrics.push_back({config.epochs, "test", result.evaluation.mean_loss, result.evaluation.accuracy.mean});
  return result;
}

}  // namespace gccn
