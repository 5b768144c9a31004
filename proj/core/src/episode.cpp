#include "gccn/episode.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "gccn/error.hpp"

namespace gccn {

void Episode::validate() const {
  if (classes.size() != ways) throw DataError("episode: class list does not match ways");
  if (std::set<int>(classes.begin(), classes.end()).size() != ways) throw DataError("episode: repeated class");
  if (support.size() != ways * shots || query.size() != ways * queries) {
    throw DataError("episode: support/query sizes do not match ways, shots and queries");
  }
  std::vector<std::size_t> s_count(ways, 0), q_count(ways, 0);
  for (const auto& it : support) {
    if (it.label < 0 || static_cast<std::size_t>(it.label) >= ways) throw DataError("episode: support label out of range");
    ++s_count[static_cast<std::size_t>(it.label)];
  }
  for (const auto& it : query) {
    if (it.label < 0 || static_cast<std::size_t>(it.label) >= ways) throw DataError("episode: query label out of range");
    ++q_count[static_cast<std::size_t>(it.label)];
  }
  for (std::size_t k = 0; k < ways; ++k) {
    if (s_count[k] != shots || q_count[k] != queries) throw DataError("episode: uneven class counts");
  }
  std::set<std::size_t> seen;
  for (const auto& it : support) seen.insert(it.sample);
  if (seen.size() != support.size()) throw DataError("episode: duplicate support sample");
  for (const auto& it : query) {
    if (!seen.insert(it.sample).second) throw DataError("episode: sample used twice");
  }
}

std::vector<std::size_t> Episode::support_samples() const {
  std::vector<std::size_t> out;
  for (const auto& it : support) out.push_back(it.sample);
  return out;
}

std::vector<std::size_t> Episode::query_samples() const {
  std::vector<std::size_t> out;
  for (const auto& it : query) out.push_back(it.sample);
  return out;
}

std::vector<int> Episode::support_labels() const {
  std::vector<int> out;
  for (const auto& it : support) out.push_back(it.label);
  return out;
}

std::vector<int> Episode::query_labels() const {
  std::vector<int> out;
  for (const auto& it : query) out.push_back(it.label);
  return out;
}

Episode sample_episode(const std::vector<std::vector<std::size_t>>& by_class, std::size_t ways, std::size_t shots,
                       std::size_t queries, Rng& rng) {
  if (ways < 1 || shots < 1 || queries < 1) throw ConfigError("episode: ways, shots and queries must be positive");
  if (by_class.size() < ways) {
    throw DataError("episode: " + std::to_string(ways) + " ways requested but dataset has " +
                    std::to_string(by_class.size()) + " classes");
  }
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    if (by_class[k].size() < shots + queries) {
      throw DataError("episode: class " + std::to_string(k) + " has " + std::to_string(by_class[k].size()) +
                      " samples, needs " + std::to_string(shots + queries));
    }
  }

  std::vector<int> order(by_class.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
  rng.shuffle(order);

  Episode ep;
  ep.ways = ways;
  ep.shots = shots;
  ep.queries = queries;
  ep.classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(ways));
  std::vector<std::vector<std::size_t>> picks;
  for (std::size_t w = 0; w < ways; ++w) {
    auto pool = by_class[static_cast<std::size_t>(ep.classes[w])];
    rng.shuffle(pool);
    pool.resize(shots + queries);
    picks.push_back(std::move(pool));
  }
  for (std::size_t w = 0; w < ways; ++w) {
    for (std::size_t s = 0; s < shots; ++s) ep.support.push_back({picks[w][s], static_cast<int>(w)});
  }
  for (std::size_t w = 0; w < ways; ++w) {
    for (std::size_t q = 0; q < queries; ++q) ep.query.push_back({picks[w][shots + q], static_cast<int>(w)});
  }
  return ep;
}

Episode sample_episode(const Dataset& dataset, std::size_t ways, std::size_t shots, std::size_t queries, Rng& rng) {
  const auto by_class = dataset.indices_by_class();
  for (std::size_t k = 0; k < by_class.size() && k < dataset.class_names.size(); ++k) {
    if (by_class[k].size() < shots + queries) {
      throw DataError("episode: class " + std::to_string(k) + " ('" + dataset.class_names[k] + "') has " +
                      std::to_string(by_class[k].size()) + " samples, needs " + std::to_string(shots + queries));
    }
  }
  return sample_episode(by_class, ways, shots, queries, rng);
}

}  // namespace gccn
