#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fewshot/embedding_store.hpp"
#include "fewshot/episode_sampler.hpp"
#include "fewshot/metric_classifier.hpp"

namespace fewshot {

struct QueryPrediction {
  std::string_view sample_id;
  std::uint32_t truth;
  std::uint32_t predicted;
};

/// Labels are indices into the owning report's label list, not episode slots.
struct EpisodeResult {
  std::uint64_t episode_index = 0;
  std::vector<QueryPrediction> predictions;
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
};

struct MeanCi {
  double mean = 0.0;
  double ci95 = 0.0;
  /// Set when only one value was aggregated, so no spread is available.
  bool single_sample = false;
};

/// Mean and 1.96 * sample-sd / sqrt(n) half-width. Throws Error(kEmptyInput)
/// on an empty input; a single value yields ci95 = 0 with single_sample set.
MeanCi aggregate_ci(std::span<const double> values);

/// Mean per-class recall over the classes present among the true labels.
/// Throws Error(kEmptyInput) on an empty input.
double balanced_accuracy(std::span<const QueryPrediction> predictions);

class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t size) : size_(size), counts_(size * size, 0) {}

  std::size_t size() const { return size_; }
  void add(std::uint32_t truth, std::uint32_t predicted, std::uint64_t count = 1) {
    counts_[truth * size_ + predicted] += count;
  }
  std::uint64_t count(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * size_ + predicted];
  }
  std::uint64_t total() const;
  /// Each non-empty row scaled to sum to 100; empty rows stay zero.
  std::vector<double> row_percent() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> counts_;
};

inline constexpr std::string_view kCiMethod =
    "normal approximation over per-episode values: 1.96 * sample_sd / sqrt(episodes)";

struct EvaluationReport {
  std::string protocol;
  std::size_t episodes = 0;
  std::uint64_t queries = 0;
  MeanCi accuracy;
  MeanCi balanced_accuracy;
  std::vector<std::string> labels;
  /// Rows are true labels, columns predicted labels, both indexing `labels`.
  ConfusionMatrix confusion;
  /// Parameters and provenance echoed into the report, in insertion order.
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

/// Folds episode results (in ascending episode order) into a report.
class ReportAccumulator {
 public:
  ReportAccumulator(std::string protocol, std::vector<std::string> labels);

  void add(const EpisodeResult& result);
  EvaluationReport finish() const;

 private:
  std::string protocol_;
  std::vector<std::string> labels_;
  ConfusionMatrix confusion_;
  std::vector<double> accuracies_;
  std::vector<double> balanced_;
  std::uint64_t queries_ = 0;
};

/// Fills accuracy and balanced accuracy from the predictions.
void score_episode(EpisodeResult& result);

struct EvaluationOptions {
  /// 0 selects std::thread::hardware_concurrency().
  std::size_t workers = 0;
  /// Invoked once per episode in ascending index order, on the calling thread.
  std::function<void(const EpisodeResult&, const Episode&)> on_episode;
};

/// Standard protocol: `episodes` independent episodes drawn from `pool` with
/// indices 0..episodes-1 under spec.master_seed (spec.episode_index ignored).
EvaluationReport run_fsl_protocol(const RecordView& pool, const ProjectionHead& head,
                                  const ClassifierConfig& config, std::size_t episodes,
                                  const EpisodeSpec& spec, const EvaluationOptions& options = {});

/// Comparable protocol: fresh supports from `support_pool` each episode, the
/// whole `query_pool` classified every time.
EvaluationReport run_comparable_protocol(const RecordView& support_pool,
                                         const RecordView& query_pool, const ProjectionHead& head,
                                         const ClassifierConfig& config, std::size_t episodes,
                                         const EpisodeSpec& spec,
                                         const EvaluationOptions& options = {});

// Per-query prediction log (JSON lines). The first line is a header
// {"protocol": ..., "labels": [...]}, then one object per query:
// {"episode": i, "sample_id": ..., "true": label, "pred": label}.
void write_log_header(std::ostream& out, std::string_view protocol,
                      const std::vector<std::string>& labels);
void write_log_episode(std::ostream& out, const EpisodeResult& result,
                       const std::vector<std::string>& labels);

struct PredictionLog {
  std::string protocol;
  std::vector<std::string> labels;
  std::vector<EpisodeResult> episodes;
  /// Backing storage for QueryPrediction::sample_id.
  std::deque<std::string> sample_ids;
};

PredictionLog read_prediction_log(std::istream& in);

enum class Polarity { kPositive, kNegative };

/// Re-scores logged predictions after mapping every label to positive or
/// negative. Throws Error(kUnmappedLabel) for a logged label missing from the
/// mapping. The collapsed labels are {"positive", "negative"}.
EvaluationReport collapse_labels(const PredictionLog& log,
                                 const std::map<std::string, Polarity>& mapping);

/// Report JSON; every floating-point value is rounded to 6 significant digits.
std::string report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(std::string_view text);

/// Rounds to 6 significant digits (the precision used in every JSON output).
double round_sig6(double value);

}  // namespace fewshot
