#include "fewshot/episode_sampler.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fewshot/error.hpp"
#include "fewshot/random.hpp"

namespace fewshot {

FslSampler::FslSampler(RecordView pool) : pool_(std::move(pool)) {
  std::map<std::uint32_t, std::vector<const EmbeddingRecord*>> grouped;
  for (const EmbeddingRecord* r : pool_) grouped[r->label].push_back(r);
  for (auto& [label, records] : grouped) {
    classes_.push_back(label);
    members_.push_back(std::move(records));
  }
}

Episode FslSampler::sample(const EpisodeSpec& spec) const {
  if (spec.n_way == 0 || spec.k_shot == 0) {
    throw Error(ErrorCode::kInvalidArgument, "n_way and k_shot must be positive");
  }
  if (spec.n_way > classes_.size()) {
    throw Error(ErrorCode::kInsufficientClasses,
                "episode needs " + std::to_string(spec.n_way) + " classes, pool has " +
                    std::to_string(classes_.size()));
  }

  Rng rng(derive_seed(spec.master_seed, spec.episode_index));
  std::vector<std::size_t> order(classes_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.partial_shuffle(std::span<std::size_t>(order), spec.n_way);

  const auto& manifest = pool_.manifest();
  Episode ep;
  ep.index = spec.episode_index;
  ep.k_shot = spec.k_shot;
  ep.slot_classes.reserve(spec.n_way);
  ep.support.reserve(spec.n_way * spec.k_shot);

  std::vector<std::vector<const EmbeddingRecord*>> drawn(spec.n_way);
  for (std::size_t slot = 0; slot < spec.n_way; ++slot) {
    const std::size_t c = order[slot];
    const auto& name = manifest.class_table[classes_[c]];
    const std::size_t available = members_[c].size();
    const std::size_t needed =
        spec.k_shot + (spec.queries.is_all_remaining() ? 0 : spec.queries.count());
    if (available < needed) {
      throw Error(ErrorCode::kInsufficientRecords,
                  "class '" + name + "' has " + std::to_string(available) +
                      " records, episode needs " + std::to_string(needed));
    }
    const std::size_t take = spec.queries.is_all_remaining() ? available : needed;
    drawn[slot] = members_[c];
    rng.partial_shuffle(std::span<const EmbeddingRecord*>(drawn[slot]), take);
    drawn[slot].resize(take);
    ep.slot_classes.push_back(name);
  }

  for (std::uint32_t slot = 0; slot < spec.n_way; ++slot) {
    for (std::size_t k = 0; k < spec.k_shot; ++k) ep.support.push_back({drawn[slot][k], slot});
  }
  for (std::uint32_t slot = 0; slot < spec.n_way; ++slot) {
    for (std::size_t k = spec.k_shot; k < drawn[slot].size(); ++k) {
      ep.query.push_back({drawn[slot][k], slot});
    }
  }
  return ep;
}

ComparableSampler::ComparableSampler(RecordView support_pool, RecordView query_pool)
    : support_(std::move(support_pool)), query_pool_(std::move(query_pool)) {
  if (query_pool_.empty()) throw Error(ErrorCode::kEmptyQuerySet, "query pool is empty");

  const auto& smanifest = support_.pool().manifest();
  std::vector<bool> support_has(smanifest.class_table.size(), false);
  for (const EmbeddingRecord* r : support_.pool()) support_has[r->label] = true;

  const auto& qmanifest = query_pool_.manifest();
  std::vector<bool> checked(qmanifest.class_table.size(), false);
  query_ids_.reserve(query_pool_.size());
  for (const EmbeddingRecord* r : query_pool_) {
    query_ids_.insert(r->sample_id);
    if (checked[r->label]) continue;
    checked[r->label] = true;
    const auto& name = qmanifest.class_name(*r);
    const auto idx = smanifest.find_class(name);
    if (!idx || !support_has[*idx]) {
      throw Error(ErrorCode::kUnknownClass,
                  "query class '" + name + "' has no records in the support pool");
    }
  }
}

Episode ComparableSampler::sample(const EpisodeSpec& spec) const {
  EpisodeSpec support_spec = spec;
  support_spec.queries = QueryCount::per_class(0);
  Episode ep = support_.sample(support_spec);

  for (const auto& entry : ep.support) {
    if (query_ids_.contains(entry.record->sample_id)) {
      throw Error(ErrorCode::kSupportQueryOverlap,
                  "support sample '" + entry.record->sample_id + "' also appears in the query pool");
    }
  }

  const auto& qmanifest = query_pool_.manifest();
  std::vector<std::uint32_t> slot_of(qmanifest.class_table.size(), kNoSlot);
  for (std::uint32_t slot = 0; slot < ep.slot_classes.size(); ++slot) {
    if (auto idx = qmanifest.find_class(ep.slot_classes[slot])) slot_of[*idx] = slot;
  }
  ep.query.reserve(query_pool_.size());
  for (const EmbeddingRecord* r : query_pool_) {
    const std::uint32_t slot = slot_of[r->label];
    if (slot == kNoSlot) {
      throw Error(ErrorCode::kInsufficientClasses,
                  "query class '" + qmanifest.class_name(*r) + "' was not drawn into episode " +
                      std::to_string(spec.episode_index) +
                      "; n_way must cover every query class");
    }
    ep.query.push_back({r, slot});
  }
  return ep;
}

Episode sample_fsl_episode(const RecordView& pool, const EpisodeSpec& spec) {
  return FslSampler(pool).sample(spec);
}

Episode sample_comparable_episode(const RecordView& support_pool, const RecordView& query_pool,
                                  const EpisodeSpec& spec) {
  return ComparableSampler(support_pool, query_pool).sample(spec);
}

std::string episode_to_json(const Episode& episode) {
  auto entries = [](const std::vector<EpisodeEntry>& list) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : list) out.push_back({{"sample_id", e.record->sample_id}, {"slot", e.slot}});
    return out;
  };
  nlohmann::json j = {{"episode_index", episode.index},
                      {"k_shot", episode.k_shot},
                      {"classes", episode.slot_classes},
                      {"support", entries(episode.support)},
                      {"query", entries(episode.query)}};
  return j.dump();
}

}  // namespace fewshot
