#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "fewshot/embedding_store.hpp"
#include "fewshot/episode_sampler.hpp"
#include "fewshot/metric_classifier.hpp"

namespace fewshot {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t episodes_per_epoch = 2000;
  std::size_t n_way = 8;
  std::size_t k_shot = 5;
  QueryCount queries = QueryCount::per_class(15);
  /// No default: callers must choose the initial learning rate.
  double learning_rate = 0.0;
  double lr_decay = 0.1;
  std::size_t lr_step_epochs = 10;
  double temperature = 0.07;
  std::uint64_t seed = 0;
};

/// Throws Error(kInvalidArgument) on any violated positivity/range constraint.
void validate(const TrainConfig& config);

/// Stepped schedule: learning_rate * lr_decay ^ floor(epoch / lr_step_epochs).
double learning_rate_at(const TrainConfig& config, std::size_t epoch);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_accuracy = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
};

struct EpisodeLoss {
  double loss = 0.0;
  std::size_t n_way = 0;
  /// Query-major softmax probabilities, query.size() x n_way.
  std::vector<double> probabilities;
  /// Fraction of queries whose argmax slot is the true slot.
  double accuracy = 0.0;
};

struct HeadGradient {
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Mean over queries of -log softmax(cos(q, p_n) / temperature)[true slot].
/// Throws Error(kEmptyQuerySet) when the episode has no queries.
EpisodeLoss episode_loss(const Episode& episode, const ProjectionHead& head, double temperature);

/// Exact gradient of episode_loss with respect to the head's weights (and
/// bias, when present). Terms are summed in support-then-query order.
HeadGradient loss_gradient(const Episode& episode, const ProjectionHead& head, double temperature);

struct TrainResult {
  ProjectionHead head;
  TrainLog log;
};

/// Called after every completed epoch.
using EpochCallback = std::function<void(const EpochLog&)>;

/// Episodic SGD, one update per episode. Episode i of epoch e is sampled with
/// episode_index = e * episodes_per_epoch + i under config.seed.
TrainResult train(const RecordView& base, const TrainConfig& config, ProjectionHead initial,
                  const EpochCallback& on_epoch = {});

}  // namespace fewshot
