#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/episode_sampler.hpp"

namespace fewshot {

/// Linear map y = W x (+ b) applied on top of frozen embeddings. W is stored
/// row-major, out_dim x in_dim, in 64-bit floats.
class ProjectionHead {
 public:
  ProjectionHead(std::size_t out_dim, std::size_t in_dim, bool with_bias = false);

  /// Identity weights (truncated or zero-padded when out_dim != in_dim).
  static ProjectionHead identity(std::size_t in_dim, std::size_t out_dim, bool with_bias = false);
  static ProjectionHead identity(std::size_t dim) { return identity(dim, dim); }

  std::size_t out_dim() const { return out_dim_; }
  std::size_t in_dim() const { return in_dim_; }
  bool has_bias() const { return has_bias_; }

  double& weight(std::size_t row, std::size_t col) { return weights_[row * in_dim_ + col]; }
  double weight(std::size_t row, std::size_t col) const { return weights_[row * in_dim_ + col]; }
  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  /// Empty when the head has no bias.
  std::span<double> bias() { return bias_; }
  std::span<const double> bias() const { return bias_; }

  /// Throws Error(kNonFiniteValue) on any NaN/inf parameter.
  void check_finite() const;

  friend bool operator==(const ProjectionHead&, const ProjectionHead&) = default;

 private:
  std::size_t out_dim_;
  std::size_t in_dim_;
  bool has_bias_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

// "PHD1" u32 out_dim u32 in_dim u8 has_bias, then W row-major and b as
// little-endian f64.
std::string encode_head(const ProjectionHead& head);
ProjectionHead decode_head(std::string_view bytes);
void save_head(const ProjectionHead& head, const std::filesystem::path& path);
ProjectionHead load_head(const std::filesystem::path& path);

/// Throws Error(kDimensionMismatch) when x.size() != head.in_dim().
std::vector<double> project(const ProjectionHead& head, std::span<const double> x);
std::vector<double> project(const ProjectionHead& head, std::span<const float> x);

struct ClassifierConfig {
  double temperature = 0.07;
};

/// One mean vector per episode slot, plus its L2-normalized copy.
class PrototypeSet {
 public:
  PrototypeSet(std::size_t dim, std::vector<double> means);

  std::size_t size() const { return dim_ == 0 ? 0 : means_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> mean(std::size_t slot) const {
    return std::span<const double>(means_).subspan(slot * dim_, dim_);
  }
  /// Throws Error(kDegenerateVector) for a zero-norm prototype.
  std::span<const double> unit(std::size_t slot) const;

 private:
  std::size_t dim_;
  std::vector<double> means_;
  std::vector<double> units_;
  std::vector<bool> degenerate_;
};

/// Maps a record to its projected embedding.
using EmbeddingFn = std::function<std::span<const double>(const EmbeddingRecord&)>;

/// prototype[n] = mean of the projected support vectors in slot n.
PrototypeSet compute_prototypes(const Episode& episode, const ProjectionHead& head);
PrototypeSet compute_prototypes(const Episode& episode, std::size_t dim, const EmbeddingFn& embed);

/// score[n] = cos(query, prototype n) / temperature. Zero-norm inputs throw
/// Error(kDegenerateVector); temperature <= 0 throws Error(kInvalidArgument).
std::vector<double> score(std::span<const double> query, const PrototypeSet& prototypes,
                          const ClassifierConfig& config);

/// Same as score() for a query already scaled to unit length.
std::vector<double> score_unit(std::span<const double> unit_query, const PrototypeSet& prototypes,
                               const ClassifierConfig& config);

/// argmax_slot(score_unit(...)) without allocating.
std::uint32_t predict_unit(std::span<const double> unit_query, const PrototypeSet& prototypes,
                           const ClassifierConfig& config);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> scores);

/// Index of the largest score; ties go to the lowest index.
std::uint32_t argmax_slot(std::span<const double> scores);

struct Classification {
  std::uint32_t slot;
  std::vector<double> probabilities;
};

Classification classify(std::span<const double> query, const PrototypeSet& prototypes,
                        const ClassifierConfig& config);

/// Returns x / |x|; throws Error(kDegenerateVector) when |x| == 0.
std::vector<double> normalized(std::span<const double> x);

}  // namespace fewshot
