#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "fewshot/embedding_store.hpp"

namespace fewshot {

/// Queries drawn per class: a fixed count, or every record of the class that
/// was not drawn into the support set.
class QueryCount {
 public:
  static constexpr QueryCount per_class(std::size_t n) { return QueryCount(n, false); }
  static constexpr QueryCount all_remaining() { return QueryCount(0, true); }

  constexpr bool is_all_remaining() const { return all_; }
  constexpr std::size_t count() const { return n_; }

  friend constexpr bool operator==(QueryCount, QueryCount) = default;

 private:
  constexpr QueryCount(std::size_t n, bool all) : n_(n), all_(all) {}
  std::size_t n_;
  bool all_;
};

struct EpisodeSpec {
  std::size_t n_way = 5;
  std::size_t k_shot = 5;
  QueryCount queries = QueryCount::per_class(15);
  std::uint64_t episode_index = 0;
  std::uint64_t master_seed = 0;
};

inline constexpr std::uint32_t kNoSlot = UINT32_MAX;

struct EpisodeEntry {
  const EmbeddingRecord* record;
  std::uint32_t slot;
};

/// One N-way K-shot task. Slots are numbered in the order classes were
/// drawn; support is slot-major with exactly k_shot entries per slot.
struct Episode {
  std::uint64_t index = 0;
  std::size_t k_shot = 0;
  std::vector<std::string> slot_classes;
  std::vector<EpisodeEntry> support;
  std::vector<EpisodeEntry> query;

  std::size_t n_way() const { return slot_classes.size(); }
};

/// Standard protocol: support and query both come from one pool.
class FslSampler {
 public:
  explicit FslSampler(RecordView pool);

  /// Pure function of (pool, spec): the generator is seeded from
  /// (master_seed, episode_index) alone.
  Episode sample(const EpisodeSpec& spec) const;

  const RecordView& pool() const { return pool_; }
  std::size_t class_count() const { return classes_.size(); }

 private:
  RecordView pool_;
  std::vector<std::uint32_t> classes_;
  std::vector<std::vector<const EmbeddingRecord*>> members_;
};

/// Comparable protocol: supports from one pool, the whole of another pool as
/// queries in every episode. Query labels are matched to slots by class name,
/// so the pools may come from different manifests.
class ComparableSampler {
 public:
  /// Throws Error(kEmptyQuerySet) for an empty query pool and
  /// Error(kUnknownClass) when a query class has no records in the support pool.
  ComparableSampler(RecordView support_pool, RecordView query_pool);

  /// `spec.queries` is ignored. Throws Error(kSupportQueryOverlap) if a drawn
  /// support sample_id also appears in the query pool.
  Episode sample(const EpisodeSpec& spec) const;

  const RecordView& query_pool() const { return query_pool_; }

 private:
  FslSampler support_;
  RecordView query_pool_;
  std::unordered_set<std::string_view> query_ids_;
};

Episode sample_fsl_episode(const RecordView& pool, const EpisodeSpec& spec);
Episode sample_comparable_episode(const RecordView& support_pool, const RecordView& query_pool,
                                  const EpisodeSpec& spec);

/// Debug dump: class names per slot and sample_ids, no vectors.
std::string episode_to_json(const Episode& episode);

}  // namespace fewshot
