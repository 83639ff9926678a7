#include "fewshot/meta_trainer.hpp"

#include <chrono>
#include <cmath>

#include "fewshot/error.hpp"

namespace fewshot {

namespace {

struct Pass {
  EpisodeLoss loss;
  HeadGradient gradient;
};

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Forward pass, and optionally the backward pass, through
// projection -> slot mean -> L2 normalization -> cosine / tau -> softmax CE.
Pass run_episode(const Episode& episode, const ProjectionHead& head, double temperature,
                 bool with_gradient) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  if (episode.query.empty()) {
    throw Error(ErrorCode::kEmptyQuerySet, "episode " + std::to_string(episode.index) + " has no queries");
  }
  const std::size_t n_way = episode.n_way();
  const std::size_t in_dim = head.in_dim();
  const std::size_t dim = head.out_dim();
  const std::size_t n_query = episode.query.size();

  auto embed = [&](const EmbeddingRecord& r) { return project(head, std::span<const float>(r.vector)); };

  // Prototypes.
  std::vector<double> proto(n_way * dim, 0.0);
  std::vector<std::size_t> counts(n_way, 0);
  for (const auto& s : episode.support) {
    const auto z = embed(*s.record);
    for (std::size_t i = 0; i < dim; ++i) proto[s.slot * dim + i] += z[i];
    ++counts[s.slot];
  }
  std::vector<double> proto_norm(n_way);
  std::vector<double> unit_proto(n_way * dim);
  for (std::size_t n = 0; n < n_way; ++n) {
    if (counts[n] == 0) throw Error(ErrorCode::kInvalidArgument, "slot without support");
    double* p = proto.data() + n * dim;
    for (std::size_t i = 0; i < dim; ++i) p[i] /= static_cast<double>(counts[n]);
    proto_norm[n] = std::sqrt(dot(p, p, dim));
    if (proto_norm[n] == 0.0) {
      throw Error(ErrorCode::kDegenerateVector, "prototype " + std::to_string(n) + " has zero norm");
    }
    for (std::size_t i = 0; i < dim; ++i) unit_proto[n * dim + i] = p[i] / proto_norm[n];
  }

  // Queries.
  std::vector<double> unit_query(n_query * dim);
  std::vector<double> query_norm(n_query);
  Pass pass;
  pass.loss.n_way = n_way;
  pass.loss.probabilities.resize(n_query * n_way);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t q = 0; q < n_query; ++q) {
    const auto& entry = episode.query[q];
    if (entry.slot >= n_way) throw Error(ErrorCode::kInvalidArgument, "query without a slot");
    const auto z = embed(*entry.record);
    query_norm[q] = std::sqrt(dot(z.data(), z.data(), dim));
    if (query_norm[q] == 0.0) {
      throw Error(ErrorCode::kDegenerateVector,
                  "query '" + entry.record->sample_id + "' projects to a zero-norm vector");
    }
    double* v = unit_query.data() + q * dim;
    for (std::size_t i = 0; i < dim; ++i) v[i] = z[i] / query_norm[q];

    std::vector<double> scores(n_way);
    for (std::size_t n = 0; n < n_way; ++n) {
      scores[n] = dot(v, unit_proto.data() + n * dim, dim) / temperature;
    }
    const auto probs = softmax(scores);
    double top = scores[0];
    for (double s : scores) top = std::max(top, s);
    double lse = 0.0;
    for (double s : scores) lse += std::exp(s - top);
    loss_sum += top + std::log(lse) - scores[entry.slot];
    if (argmax_slot(scores) == entry.slot) ++correct;
    std::copy(probs.begin(), probs.end(), pass.loss.probabilities.begin() + q * n_way);
  }
  pass.loss.loss = loss_sum / static_cast<double>(n_query);
  pass.loss.accuracy = static_cast<double>(correct) / static_cast<double>(n_query);
  if (!with_gradient) return pass;

  // Backward. g[q][n] = dL/dscore = (P - onehot) / |Q|.
  const double inv_q = 1.0 / static_cast<double>(n_query);
  std::vector<double> d_unit_proto(n_way * dim, 0.0);
  std::vector<double> d_z_query(n_query * dim, 0.0);
  for (std::size_t q = 0; q < n_query; ++q) {
    const double* v = unit_query.data() + q * dim;
    std::vector<double> d_v(dim, 0.0);
    for (std::size_t n = 0; n < n_way; ++n) {
      double g = pass.loss.probabilities[q * n_way + n];
      if (n == episode.query[q].slot) g -= 1.0;
      g *= inv_q / temperature;
      const double* u = unit_proto.data() + n * dim;
      for (std::size_t i = 0; i < dim; ++i) {
        d_v[i] += g * u[i];
        d_unit_proto[n * dim + i] += g * v[i];
      }
    }
    // Through v = z / |z|.
    const double radial = dot(v, d_v.data(), dim);
    for (std::size_t i = 0; i < dim; ++i) {
      d_z_query[q * dim + i] = (d_v[i] - v[i] * radial) / query_norm[q];
    }
  }
  std::vector<double> d_proto(n_way * dim);
  for (std::size_t n = 0; n < n_way; ++n) {
    const double* u = unit_proto.data() + n * dim;
    const double* du = d_unit_proto.data() + n * dim;
    const double radial = dot(u, du, dim);
    for (std::size_t i = 0; i < dim; ++i) d_proto[n * dim + i] = (du[i] - u[i] * radial) / proto_norm[n];
  }

  pass.gradient.weights.assign(dim * in_dim, 0.0);
  pass.gradient.bias.assign(head.has_bias() ? dim : 0, 0.0);
  auto accumulate = [&](const double* d_z, const std::vector<float>& x, double scale) {
    for (std::size_t r = 0; r < dim; ++r) {
      const double g = d_z[r] * scale;
      double* row = pass.gradient.weights.data() + r * in_dim;
      for (std::size_t c = 0; c < in_dim; ++c) row[c] += g * static_cast<double>(x[c]);
      if (head.has_bias()) pass.gradient.bias[r] += g;
    }
  };
  for (const auto& s : episode.support) {
    accumulate(d_proto.data() + s.slot * dim, s.record->vector,
               1.0 / static_cast<double>(counts[s.slot]));
  }
  for (std::size_t q = 0; q < n_query; ++q) {
    accumulate(d_z_query.data() + q * dim, episode.query[q].record->vector, 1.0);
  }
  return pass;
}

}  // namespace

void validate(const TrainConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
  };
  require(c.episodes_per_epoch > 0, "episodes_per_epoch must be positive");
  require(c.n_way > 0 && c.k_shot > 0, "n_way and k_shot must be positive");
  require(c.queries.is_all_remaining() || c.queries.count() > 0, "queries per class must be positive");
  require(c.learning_rate > 0.0 && std::isfinite(c.learning_rate), "learning rate must be positive");
  require(c.lr_decay > 0.0 && c.lr_decay < 1.0, "lr decay factor must lie in (0, 1)");
  require(c.lr_step_epochs > 0, "lr_step_epochs must be positive");
  require(c.epochs == 0 || c.lr_step_epochs <= c.epochs, "lr_step_epochs must not exceed epochs");
  require(c.temperature > 0.0 && std::isfinite(c.temperature), "temperature must be positive");
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
  const auto steps = static_cast<double>(epoch / config.lr_step_epochs);
  return config.learning_rate * std::pow(config.lr_decay, steps);
}

EpisodeLoss episode_loss(const Episode& episode, const ProjectionHead& head, double temperature) {
  return run_episode(episode, head, temperature, false).loss;
}

HeadGradient loss_gradient(const Episode& episode, const ProjectionHead& head, double temperature) {
  return run_episode(episode, head, temperature, true).gradient;
}

TrainResult train(const RecordView& base, const TrainConfig& config, ProjectionHead initial,
                  const EpochCallback& on_epoch) {
  TrainResult result{std::move(initial), {}};
  if (config.epochs == 0) return result;
  validate(config);
  if (result.head.in_dim() != base.manifest().dimension) {
    throw Error(ErrorCode::kDimensionMismatch, "head in_dim does not match manifest dimension");
  }
  result.head.check_finite();

  const FslSampler sampler(base);
  ProjectionHead& head = result.head;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = learning_rate_at(config, epoch);
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    for (std::size_t i = 0; i < config.episodes_per_epoch; ++i) {
      EpisodeSpec spec{config.n_way, config.k_shot, config.queries,
                       epoch * config.episodes_per_epoch + i, config.seed};
      Episode episode;
      try {
        episode = sampler.sample(spec);
      } catch (const Error& e) {
        throw Error(e.code(), "episode " + std::to_string(spec.episode_index) + ": " + e.what());
      }
      Pass pass = run_episode(episode, head, config.temperature, true);
      if (!std::isfinite(pass.loss.loss)) {
        throw Error(ErrorCode::kNonFiniteLoss,
                    "non-finite loss at epoch " + std::to_string(epoch) + ", episode " +
                        std::to_string(i) + ", learning rate " + std::to_string(lr));
      }
      loss_sum += pass.loss.loss;
      acc_sum += pass.loss.accuracy;
      bool finite = true;
      auto w = head.weights();
      for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] -= lr * pass.gradient.weights[k];
        finite = finite && std::isfinite(w[k]);
      }
      auto b = head.bias();
      for (std::size_t k = 0; k < b.size(); ++k) {
        b[k] -= lr * pass.gradient.bias[k];
        finite = finite && std::isfinite(b[k]);
      }
      if (!finite) {
        throw Error(ErrorCode::kNonFiniteLoss,
                    "parameters became non-finite at epoch " + std::to_string(epoch) +
                        ", episode " + std::to_string(i) + ", learning rate " + std::to_string(lr));
      }
    }
    const double episodes = static_cast<double>(config.episodes_per_epoch);
    EpochLog entry{epoch, loss_sum / episodes, acc_sum / episodes, lr,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    result.log.epochs.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

}  // namespace fewshot
