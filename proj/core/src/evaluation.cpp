#include "fewshot/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "fewshot/error.hpp"
#include "parallel.hpp"

namespace fewshot {

namespace {

using ordered_json = nlohmann::ordered_json;

/// Projected and unit-normalized embeddings for every record of a pool,
/// computed once per run.
class EmbeddingCache {
 public:
  EmbeddingCache(const RecordView& pool, const ProjectionHead& head, std::size_t workers)
      : manifest_(&pool.manifest()), dim_(head.out_dim()) {
    if (head.in_dim() != manifest_->dimension) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "head in_dim " + std::to_string(head.in_dim()) + " != manifest dimension " +
                      std::to_string(manifest_->dimension));
    }
    const std::size_t n = pool.size();
    row_of_.assign(manifest_->records.size(), kAbsent);
    for (std::size_t i = 0; i < n; ++i) row_of_[index_of(pool[i])] = i;
    projected_.resize(n * dim_);
    unit_.resize(n * dim_);
    degenerate_.assign(n, 0);
    detail::parallel_for(n, workers, [&](std::size_t i) {
      const auto y = project(head, std::span<const float>(pool[i].vector));
      double norm = 0.0;
      for (double v : y) norm += v * v;
      norm = std::sqrt(norm);
      for (std::size_t d = 0; d < dim_; ++d) {
        projected_[i * dim_ + d] = y[d];
        unit_[i * dim_ + d] = norm == 0.0 ? 0.0 : y[d] / norm;
      }
      degenerate_[i] = norm == 0.0 ? 1 : 0;
    });
  }

  std::size_t dim() const { return dim_; }

  std::span<const double> projected(const EmbeddingRecord& r) const {
    return std::span<const double>(projected_).subspan(row(r) * dim_, dim_);
  }

  std::span<const double> unit(const EmbeddingRecord& r) const {
    const std::size_t i = row(r);
    if (degenerate_[i]) {
      throw Error(ErrorCode::kDegenerateVector,
                  "query '" + r.sample_id + "' projects to a zero-norm vector");
    }
    return std::span<const double>(unit_).subspan(i * dim_, dim_);
  }

 private:
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

  std::size_t index_of(const EmbeddingRecord& r) const {
    return static_cast<std::size_t>(&r - manifest_->records.data());
  }
  std::size_t row(const EmbeddingRecord& r) const { return row_of_[index_of(r)]; }

  const DatasetManifest* manifest_;
  std::size_t dim_;
  std::vector<std::size_t> row_of_;
  std::vector<double> projected_;
  std::vector<double> unit_;
  std::vector<char> degenerate_;
};

struct ProtocolSetup {
  std::string protocol;
  std::vector<std::string> labels;
  std::unordered_map<std::string, std::uint32_t> label_ids;
  std::vector<std::uint32_t> query_label;  // query manifest class -> label id
};

/// Labels are the support pool's classes; query classes map onto them by
/// name (the samplers reject query classes without support).
ProtocolSetup make_setup(std::string protocol, const RecordView& support_pool,
                         const RecordView& query_pool) {
  ProtocolSetup setup;
  setup.protocol = std::move(protocol);
  for (const auto& name : present_classes(support_pool)) {
    setup.label_ids.emplace(name, static_cast<std::uint32_t>(setup.labels.size()));
    setup.labels.push_back(name);
  }
  const auto& qm = query_pool.manifest();
  setup.query_label.assign(qm.class_table.size(), 0);
  for (std::size_t c = 0; c < qm.class_table.size(); ++c) {
    const auto it = setup.label_ids.find(qm.class_table[c]);
    if (it != setup.label_ids.end()) setup.query_label[c] = it->second;
  }
  return setup;
}

template <typename SampleFn>
EvaluationReport run_protocol(ProtocolSetup setup, std::size_t episodes, SampleFn&& sample,
                              const EmbeddingCache& support_cache,
                              const EmbeddingCache& query_cache, const ClassifierConfig& config,
                              const EvaluationOptions& options) {
  if (episodes == 0) throw Error(ErrorCode::kInvalidArgument, "episode count must be positive");
  if (!(config.temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  }
  const std::size_t workers = detail::resolve_workers(options.workers);
  ReportAccumulator acc(setup.protocol, setup.labels);

  struct Slot {
    Episode episode;
    EpisodeResult result;
    std::exception_ptr error;
  };
  const std::size_t chunk = std::max<std::size_t>(1, workers * 4);
  std::vector<Slot> slots(chunk);
  for (std::size_t first = 0; first < episodes; first += chunk) {
    const std::size_t count = std::min(chunk, episodes - first);
    detail::parallel_for(count, workers, [&](std::size_t k) {
      Slot& slot = slots[k];
      slot = Slot{};
      try {
        slot.episode = sample(first + k);
        const Episode& ep = slot.episode;
        const PrototypeSet protos =
            compute_prototypes(ep, support_cache.dim(), [&](const EmbeddingRecord& r) {
              return support_cache.projected(r);
            });
        std::vector<std::uint32_t> slot_label(ep.n_way());
        for (std::size_t n = 0; n < ep.n_way(); ++n) {
          slot_label[n] = setup.label_ids.at(ep.slot_classes[n]);
        }
        slot.result.episode_index = ep.index;
        slot.result.predictions.reserve(ep.query.size());
        for (const auto& q : ep.query) {
          const std::uint32_t pred = predict_unit(query_cache.unit(*q.record), protos, config);
          slot.result.predictions.push_back(
              {q.record->sample_id, setup.query_label[q.record->label], slot_label[pred]});
        }
        score_episode(slot.result);
      } catch (...) {
        slot.error = std::current_exception();
      }
    });
    for (std::size_t k = 0; k < count; ++k) {
      if (slots[k].error) {
        try {
          std::rethrow_exception(slots[k].error);
        } catch (const Error& e) {
          throw Error(e.code(), "episode " + std::to_string(first + k) + ": " + e.what());
        }
      }
      acc.add(slots[k].result);
      if (options.on_episode) options.on_episode(slots[k].result, slots[k].episode);
    }
  }
  return acc.finish();
}

ordered_json spec_echo(std::string_view protocol, const EpisodeSpec& spec, std::size_t episodes,
                       const ClassifierConfig& config, const ProjectionHead& head) {
  ordered_json j;
  j["protocol"] = protocol;
  j["n_way"] = spec.n_way;
  j["k_shot"] = spec.k_shot;
  if (spec.queries.is_all_remaining()) {
    j["queries_per_class"] = "all";
  } else {
    j["queries_per_class"] = spec.queries.count();
  }
  j["episodes"] = episodes;
  j["temperature"] = config.temperature;
  j["master_seed"] = spec.master_seed;
  j["head"] = {{"out_dim", head.out_dim()}, {"in_dim", head.in_dim()}, {"bias", head.has_bias()}};
  return j;
}

void round_floats(ordered_json& j) {
  if (j.is_number_float()) {
    j = round_sig6(j.get<double>());
  } else if (j.is_structured()) {
    for (auto& child : j) round_floats(child);
  }
}

ordered_json mean_ci_json(const MeanCi& m) {
  return {{"mean", m.mean}, {"ci95", m.ci95}};
}

}  // namespace

MeanCi aggregate_ci(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyInput, "no values to aggregate");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  MeanCi out;
  out.mean = sum / n;
  if (values.size() == 1) {
    out.single_sample = true;
    return out;
  }
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    out.mean = values.front();
    return out;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  out.ci95 = 1.96 * sd / std::sqrt(n);
  return out;
}

double balanced_accuracy(std::span<const QueryPrediction> predictions) {
  if (predictions.empty()) throw Error(ErrorCode::kEmptyInput, "no predictions");
  std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
  for (const auto& p : predictions) {
    auto& [correct, total] = per_class[p.truth];
    ++total;
    if (p.predicted == p.truth) ++correct;
  }
  double sum = 0.0;
  for (const auto& [label, ct] : per_class) {
    sum += static_cast<double>(ct.first) / static_cast<double>(ct.second);
  }
  return sum / static_cast<double>(per_class.size());
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::vector<double> ConfusionMatrix::row_percent() const {
  std::vector<double> out(counts_.size(), 0.0);
  for (std::size_t r = 0; r < size_; ++r) {
    std::uint64_t row_total = 0;
    for (std::size_t c = 0; c < size_; ++c) row_total += count(r, c);
    if (row_total == 0) continue;
    for (std::size_t c = 0; c < size_; ++c) {
      out[r * size_ + c] = 100.0 * static_cast<double>(count(r, c)) / static_cast<double>(row_total);
    }
  }
  return out;
}

void score_episode(EpisodeResult& result) {
  if (result.predictions.empty()) {
    throw Error(ErrorCode::kEmptyQuerySet,
                "episode " + std::to_string(result.episode_index) + " has no queries");
  }
  std::size_t correct = 0;
  for (const auto& p : result.predictions) correct += p.truth == p.predicted ? 1 : 0;
  result.accuracy =
      static_cast<double>(correct) / static_cast<double>(result.predictions.size());
  result.balanced_accuracy = balanced_accuracy(result.predictions);
}

ReportAccumulator::ReportAccumulator(std::string protocol, std::vector<std::string> labels)
    : protocol_(std::move(protocol)), labels_(std::move(labels)), confusion_(labels_.size()) {}

void ReportAccumulator::add(const EpisodeResult& result) {
  for (const auto& p : result.predictions) confusion_.add(p.truth, p.predicted);
  queries_ += result.predictions.size();
  accuracies_.push_back(result.accuracy);
  balanced_.push_back(result.balanced_accuracy);
}

EvaluationReport ReportAccumulator::finish() const {
  EvaluationReport r;
  r.protocol = protocol_;
  r.episodes = accuracies_.size();
  r.queries = queries_;
  r.accuracy = aggregate_ci(accuracies_);
  r.balanced_accuracy = aggregate_ci(balanced_);
  r.labels = labels_;
  r.confusion = confusion_;
  return r;
}

EvaluationReport run_fsl_protocol(const RecordView& pool, const ProjectionHead& head,
                                  const ClassifierConfig& config, std::size_t episodes,
                                  const EpisodeSpec& spec, const EvaluationOptions& options) {
  const std::size_t workers = detail::resolve_workers(options.workers);
  const FslSampler sampler(pool);
  const EmbeddingCache cache(pool, head, workers);

  ProtocolSetup setup = make_setup("fsl", pool, pool);

  auto sample = [&](std::size_t i) {
    EpisodeSpec s = spec;
    s.episode_index = i;
    return sampler.sample(s);
  };
  EvaluationReport report =
      run_protocol(std::move(setup), episodes, sample, cache, cache, config, options);
  report.config = spec_echo("fsl", spec, episodes, config, head);
  return report;
}

EvaluationReport run_comparable_protocol(const RecordView& support_pool,
                                         const RecordView& query_pool, const ProjectionHead& head,
                                         const ClassifierConfig& config, std::size_t episodes,
                                         const EpisodeSpec& spec,
                                         const EvaluationOptions& options) {
  const std::size_t workers = detail::resolve_workers(options.workers);
  const ComparableSampler sampler(support_pool, query_pool);
  const EmbeddingCache support_cache(support_pool, head, workers);
  const EmbeddingCache query_cache(query_pool, head, workers);

  ProtocolSetup setup = make_setup("comparable", support_pool, query_pool);
  auto sample = [&](std::size_t i) {
    EpisodeSpec s = spec;
    s.episode_index = i;
    return sampler.sample(s);
  };
  EvaluationReport report = run_protocol(std::move(setup), episodes, sample, support_cache,
                                         query_cache, config, options);
  report.config = spec_echo("comparable", spec, episodes, config, head);
  report.config.erase("queries_per_class");
  report.config["query_pool_size"] = query_pool.size();
  return report;
}

void write_log_header(std::ostream& out, std::string_view protocol,
                      const std::vector<std::string>& labels) {
  ordered_json j;
  j["protocol"] = protocol;
  j["labels"] = labels;
  out << j.dump() << '\n';
}

void write_log_episode(std::ostream& out, const EpisodeResult& result,
                       const std::vector<std::string>& labels) {
  for (const auto& p : result.predictions) {
    ordered_json j;
    j["episode"] = result.episode_index;
    j["sample_id"] = p.sample_id;
    j["true"] = labels[p.truth];
    j["pred"] = labels[p.predicted];
    out << j.dump() << '\n';
  }
}

PredictionLog read_prediction_log(std::istream& in) {
  PredictionLog log;
  std::unordered_map<std::string, std::uint32_t> ids;
  auto label_id = [&](const std::string& name) {
    auto [it, inserted] = ids.emplace(name, static_cast<std::uint32_t>(log.labels.size()));
    if (inserted) log.labels.push_back(name);
    return it->second;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("labels")) {
        log.protocol = j.value("protocol", std::string());
        for (const auto& name : j.at("labels")) label_id(name.get<std::string>());
        continue;
      }
      const auto episode = j.at("episode").get<std::uint64_t>();
      if (log.episodes.empty() || log.episodes.back().episode_index != episode) {
        if (!log.episodes.empty() && episode < log.episodes.back().episode_index) {
          throw Error(ErrorCode::kCorruptRecord,
                      "line " + std::to_string(line_no) + ": episodes out of order");
        }
        log.episodes.push_back(EpisodeResult{episode, {}, 0.0, 0.0});
      }
      log.sample_ids.push_back(j.at("sample_id").get<std::string>());
      log.episodes.back().predictions.push_back({log.sample_ids.back(),
                                                 label_id(j.at("true").get<std::string>()),
                                                 label_id(j.at("pred").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kCorruptRecord, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (auto& ep : log.episodes) score_episode(ep);
  return log;
}

EvaluationReport collapse_labels(const PredictionLog& log,
                                 const std::map<std::string, Polarity>& mapping) {
  if (log.episodes.empty()) throw Error(ErrorCode::kEmptyInput, "prediction log has no episodes");
  std::vector<std::uint32_t> collapsed(log.labels.size());
  for (std::size_t i = 0; i < log.labels.size(); ++i) {
    const auto it = mapping.find(log.labels[i]);
    if (it == mapping.end()) {
      throw Error(ErrorCode::kUnmappedLabel, "label '" + log.labels[i] + "' has no mapping");
    }
    collapsed[i] = it->second == Polarity::kPositive ? 0 : 1;
  }
  ReportAccumulator acc(log.protocol.empty() ? "collapsed" : log.protocol + "+collapsed",
                        {"positive", "negative"});
  for (const auto& ep : log.episodes) {
    EpisodeResult mapped{ep.episode_index, {}, 0.0, 0.0};
    mapped.predictions.reserve(ep.predictions.size());
    for (const auto& p : ep.predictions) {
      mapped.predictions.push_back({p.sample_id, collapsed[p.truth], collapsed[p.predicted]});
    }
    score_episode(mapped);
    acc.add(mapped);
  }
  EvaluationReport report = acc.finish();
  ordered_json map_echo = ordered_json::object();
  for (const auto& [label, polarity] : mapping) {
    map_echo[label] = polarity == Polarity::kPositive ? "pos" : "neg";
  }
  report.config["source_protocol"] = log.protocol;
  report.config["mapping"] = map_echo;
  return report;
}

double round_sig6(double value) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return std::strtod(buf, nullptr);
}

std::string report_to_json(const EvaluationReport& report) {
  ordered_json j;
  j["protocol"] = report.protocol;
  j["episodes"] = report.episodes;
  j["queries"] = report.queries;
  j["accuracy"] = mean_ci_json(report.accuracy);
  j["balanced_accuracy"] = mean_ci_json(report.balanced_accuracy);
  j["ci_method"] = kCiMethod;
  j["ci_single_episode"] = report.accuracy.single_sample;

  const std::size_t n = report.confusion.size();
  const auto percent = report.confusion.row_percent();
  ordered_json counts = ordered_json::array();
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < n; ++r) {
    ordered_json crow = ordered_json::array();
    ordered_json prow = ordered_json::array();
    for (std::size_t c = 0; c < n; ++c) {
      crow.push_back(report.confusion.count(r, c));
      prow.push_back(percent[r * n + c]);
    }
    counts.push_back(std::move(crow));
    rows.push_back(std::move(prow));
  }
  j["confusion"] = {{"labels", report.labels}, {"counts", counts}, {"row_percent", rows}};
  j["config"] = report.config;
  round_floats(j);
  return j.dump(2) + "\n";
}

EvaluationReport report_from_json(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    EvaluationReport r;
    r.protocol = j.at("protocol").get<std::string>();
    r.episodes = j.at("episodes").get<std::size_t>();
    r.queries = j.at("queries").get<std::uint64_t>();
    r.accuracy = {j.at("accuracy").at("mean").get<double>(),
                  j.at("accuracy").at("ci95").get<double>(),
                  j.value("ci_single_episode", false)};
    r.balanced_accuracy = {j.at("balanced_accuracy").at("mean").get<double>(),
                           j.at("balanced_accuracy").at("ci95").get<double>(),
                           r.accuracy.single_sample};
    const auto& confusion = j.at("confusion");
    r.labels = confusion.at("labels").get<std::vector<std::string>>();
    r.confusion = ConfusionMatrix(r.labels.size());
    const auto& counts = confusion.at("counts");
    if (counts.size() != r.labels.size()) {
      throw Error(ErrorCode::kCorruptRecord, "confusion counts do not match labels");
    }
    for (std::size_t t = 0; t < counts.size(); ++t) {
      if (counts[t].size() != r.labels.size()) {
        throw Error(ErrorCode::kCorruptRecord, "confusion row has wrong length");
      }
      for (std::size_t p = 0; p < counts[t].size(); ++p) {
        r.confusion.add(static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(p),
                        counts[t][p].get<std::uint64_t>());
      }
    }
    r.config = j.value("config", ordered_json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptRecord, std::string("report JSON: ") + e.what());
  }
}

}  // namespace fewshot
