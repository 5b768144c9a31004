#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gccn/autodiff.hpp"
#include "gccn/dataset.hpp"
#include "gccn/episode.hpp"
#include "gccn/gccn_net.hpp"

namespace gccn {

enum class Metric { euclidean, cosine };
enum class Head { prototypical, matching };

std::string to_string(Metric metric);
std::string to_string(Head head);
Metric parse_metric(const std::string& text);  // "euclid" | "euclidean" | "cosine"
Head parse_head(const std::string& text);      // "proto" | "matching"

// Norms below this value are replaced by it inside cosine similarity.
inline constexpr double kCosineNormFloor = 1e-12;

// ---- distances on plain vectors -------------------------------------------

double euclidean(std::span<const double> p, std::span<const double> q);
double cosine(std::span<const double> p, std::span<const double> q);

// Score fed to the softmax: -euclidean distance or +cosine similarity.
double similarity(std::span<const double> p, std::span<const double> q, Metric metric);

using Vectors = std::vector<std::vector<double>>;

// Per-class mean of the support embeddings. Throws DataError for a class with
// no support.
Vectors prototypes(const Vectors& support, std::span<const int> labels, std::size_t ways);

struct Prediction {
  std::vector<double> probabilities;
  // Highest score; the lowest class index wins ties. For the prototypical
  // head this is the nearest (euclidean) or most similar (cosine) prototype.
  std::size_t label = 0;
};

Prediction proto_predict(std::span<const double> query, const Vectors& protos, Metric metric);

// Attention a_i = softmax_i(score(query, support_i)); P(class) = sum of the
// attention of that class's supports.
Prediction matching_predict(std::span<const double> query, const Vectors& support, std::span<const int> labels,
                            std::size_t ways, Metric metric = Metric::cosine);

// ---- differentiable heads --------------------------------------------------

// [n, d] x [m, d] -> [n, m]
Var pairwise_euclidean(Var a, Var b);
Var pairwise_cosine(Var a, Var b);
// Mean of the rows of each group: [n, d] -> [groups, d].
Var group_mean(Var x, std::span<const int> groups, std::size_t count);

struct HeadConfig {
  Head head = Head::prototypical;
  Metric metric = Metric::euclidean;
};

struct HeadOutput {
  Var loss;                         // mean negative log-probability of the query labels
  std::vector<std::size_t> predicted;
  double accuracy = 0.0;
};

// Scores queries against the support set with the chosen head.
HeadOutput head_loss(Var support, std::span<const int> support_labels, Var query, std::span<const int> query_labels,
                     std::size_t ways, const HeadConfig& config);

// Embeds support and query images in one batch and applies the head.
HeadOutput episode_loss(Graph& graph, const Dataset& dataset, const Episode& episode, const GccnNet& net,
                        ParameterSet& params, const HeadConfig& config, Mode mode);

}  // namespace gccn
