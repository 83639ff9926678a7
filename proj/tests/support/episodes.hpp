#pragma once

#include <deque>
#include <string>
#include <vector>

#include "fewshot/episode_sampler.hpp"

namespace fewshot::testing {

/// Hand-built episode over records owned by the builder.
class EpisodeBuilder {
 public:
  explicit EpisodeBuilder(std::size_t n_way) {
    for (std::size_t n = 0; n < n_way; ++n) episode_.slot_classes.push_back("s" + std::to_string(n));
  }

  EpisodeBuilder& support(std::uint32_t slot, std::vector<float> v) {
    episode_.support.push_back({&add(slot, std::move(v)), slot});
    return *this;
  }
  EpisodeBuilder& query(std::uint32_t slot, std::vector<float> v) {
    episode_.query.push_back({&add(slot, std::move(v)), slot});
    return *this;
  }

  const Episode& episode() {
    if (!episode_.support.empty()) {
      episode_.k_shot = episode_.support.size() / episode_.n_way();
    }
    return episode_;
  }

 private:
  const EmbeddingRecord& add(std::uint32_t slot, std::vector<float> v) {
    EmbeddingRecord r;
    r.sample_id = "r" + std::to_string(records_.size());
    r.label = slot;
    r.vector = std::move(v);
    records_.push_back(std::move(r));
    return records_.back();
  }

  std::deque<EmbeddingRecord> records_;
  Episode episode_;
};

}  // namespace fewshot::testing
