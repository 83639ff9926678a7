#include "fewshot/episode_sampler.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fewshot/error.hpp"
#include "support/fixtures.hpp"

namespace fewshot {
namespace {

std::vector<std::string> ids(const std::vector<EpisodeEntry>& entries) {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.record->sample_id);
  return out;
}

class FslSamplerTest : public ::testing::Test {
 protected:
  DatasetManifest m = testing::sized_manifest(std::vector<std::size_t>(10, 25), 4, 3);
  RecordView pool = view(m);
};

TEST_F(FslSamplerTest, ShapesMatchSpec) {
  const EpisodeSpec spec{5, 3, QueryCount::per_class(7), 12, 99};
  const Episode ep = sample_fsl_episode(pool, spec);
  EXPECT_EQ(ep.index, 12u);
  EXPECT_EQ(ep.n_way(), 5u);
  ASSERT_EQ(ep.support.size(), 15u);
  ASSERT_EQ(ep.query.size(), 35u);
  std::set<std::string> classes(ep.slot_classes.begin(), ep.slot_classes.end());
  EXPECT_EQ(classes.size(), 5u);
  for (std::size_t i = 0; i < ep.support.size(); ++i) {
    EXPECT_EQ(ep.support[i].slot, i / 3);
    EXPECT_EQ(m.class_name(*ep.support[i].record), ep.slot_classes[ep.support[i].slot]);
  }
  for (std::size_t i = 0; i < ep.query.size(); ++i) {
    EXPECT_EQ(ep.query[i].slot, i / 7);
    EXPECT_EQ(m.class_name(*ep.query[i].record), ep.slot_classes[ep.query[i].slot]);
  }
}

TEST_F(FslSamplerTest, SupportAndQueryDisjointWithoutRepeats) {
  const FslSampler sampler(pool);
  for (std::uint64_t i = 0; i < 200; ++i) {
    const Episode ep = sampler.sample({5, 5, QueryCount::per_class(15), i, 7});
    std::set<std::string> seen;
    for (const auto& id : ids(ep.support)) EXPECT_TRUE(seen.insert(id).second);
    for (const auto& id : ids(ep.query)) EXPECT_TRUE(seen.insert(id).second);
  }
}

TEST_F(FslSamplerTest, DeterministicPerIndex) {
  const FslSampler sampler(pool);
  const EpisodeSpec spec{5, 5, QueryCount::per_class(15), 41, 1234};
  const Episode a = sampler.sample(spec);
  const Episode b = sampler.sample(spec);
  EXPECT_EQ(a.slot_classes, b.slot_classes);
  EXPECT_EQ(ids(a.support), ids(b.support));
  EXPECT_EQ(ids(a.query), ids(b.query));
  EXPECT_EQ(episode_to_json(a), episode_to_json(b));
}

TEST_F(FslSamplerTest, IndicesGiveDistinctEpisodes) {
  const FslSampler sampler(pool);
  std::set<std::vector<std::string>> supports;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    supports.insert(ids(sampler.sample({5, 5, QueryCount::per_class(15), i, 5}).support));
  }
  EXPECT_EQ(supports.size(), 1000u);
}

TEST_F(FslSamplerTest, SampleOrderDoesNotMatter) {
  const FslSampler sampler(pool);
  const Episode direct = sampler.sample({5, 1, QueryCount::per_class(2), 500, 8});
  for (std::uint64_t i = 0; i < 500; ++i) sampler.sample({5, 1, QueryCount::per_class(2), i, 8});
  const Episode later = sampler.sample({5, 1, QueryCount::per_class(2), 500, 8});
  EXPECT_EQ(ids(direct.support), ids(later.support));
  EXPECT_EQ(ids(direct.query), ids(later.query));
}

TEST_F(FslSamplerTest, AllRemainingTakesRestOfEachClass) {
  const Episode ep = sample_fsl_episode(pool, {4, 5, QueryCount::all_remaining(), 0, 0});
  EXPECT_EQ(ep.support.size(), 20u);
  EXPECT_EQ(ep.query.size(), 80u);
}

TEST_F(FslSamplerTest, ClassesCoverPoolOverManyEpisodes) {
  const FslSampler sampler(pool);
  std::map<std::string, int> hits;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    for (const auto& c : sampler.sample({2, 1, QueryCount::per_class(1), i, 3}).slot_classes) {
      ++hits[c];
    }
  }
  ASSERT_EQ(hits.size(), 10u);
  // Each class expected 400 times; 4 sd ~ 72.
  for (const auto& [name, n] : hits) {
    EXPECT_GT(n, 320) << name;
    EXPECT_LT(n, 480) << name;
  }
}

TEST_F(FslSamplerTest, TooFewClasses) {
  try {
    sample_fsl_episode(pool, {11, 1, QueryCount::per_class(1), 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientClasses);
  }
}

TEST(FslSampler, TooFewRecordsNamesClass) {
  const auto m = testing::sized_manifest({30, 30, 4}, 2, 1);
  try {
    for (std::uint64_t i = 0; i < 50; ++i) {
      sample_fsl_episode(view(m), {3, 2, QueryCount::per_class(3), i, 0});
    }
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientRecords);
    EXPECT_NE(std::string(e.what()).find("c2"), std::string::npos);
  }
}

TEST(FslSampler, OnlyUsesPoolRecords) {
  auto m = testing::sized_manifest({10, 10, 10}, 2, 1);
  for (std::size_t i = 0; i < m.records.size(); i += 2) m.records[i].split = Split::kTest;
  const RecordView pool = view(m, Split::kTest);
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Episode ep = sample_fsl_episode(pool, {3, 2, QueryCount::per_class(3), i, 0});
    for (const auto& e : ep.support) EXPECT_EQ(e.record->split, Split::kTest);
    for (const auto& e : ep.query) EXPECT_EQ(e.record->split, Split::kTest);
  }
}

class ComparableTest : public ::testing::Test {
 protected:
  ComparableTest() {
    support = testing::sized_manifest({10, 10, 10, 10, 10}, 3, 1);
    query = testing::sized_manifest({4, 3, 0, 2}, 3, 2);
    for (auto& r : query.records) r.sample_id = "q_" + r.sample_id;
  }
  DatasetManifest support;
  DatasetManifest query;
};

TEST_F(ComparableTest, EveryEpisodeUsesWholeQueryPool) {
  const ComparableSampler sampler(view(support), view(query));
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Episode ep = sampler.sample({5, 8, QueryCount::per_class(0), i, 4});
    EXPECT_EQ(ep.support.size(), 40u);
    ASSERT_EQ(ep.query.size(), query.records.size());
    for (std::size_t q = 0; q < ep.query.size(); ++q) {
      EXPECT_EQ(ep.query[q].record, &query.records[q]);
      EXPECT_EQ(ep.slot_classes[ep.query[q].slot], query.class_name(query.records[q]));
    }
  }
}

TEST_F(ComparableTest, SupportDrawsVaryButAreReproducible) {
  const ComparableSampler sampler(view(support), view(query));
  const EpisodeSpec spec{5, 5, QueryCount::per_class(0), 3, 4};
  EXPECT_EQ(ids(sampler.sample(spec).support), ids(sampler.sample(spec).support));
  EpisodeSpec next = spec;
  next.episode_index = 4;
  EXPECT_NE(ids(sampler.sample(spec).support), ids(sampler.sample(next).support));
}

TEST_F(ComparableTest, OverlapIsRejected) {
  query.records[0].sample_id = "c0_0";
  const ComparableSampler sampler(view(support), view(query));
  bool rejected = false;
  for (std::uint64_t i = 0; i < 50 && !rejected; ++i) {
    try {
      sampler.sample({5, 5, QueryCount::per_class(0), i, 4});
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kSupportQueryOverlap);
      rejected = true;
    }
  }
  EXPECT_TRUE(rejected);
}

TEST_F(ComparableTest, QueryClassMissingFromSupport) {
  query.class_table[1] = "bedroom";
  try {
    ComparableSampler sampler(view(support), view(query));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownClass);
  }
}

TEST_F(ComparableTest, QueryClassNotDrawnIsAnError) {
  const ComparableSampler sampler(view(support), view(query));
  EXPECT_THROW(sampler.sample({2, 5, QueryCount::per_class(0), 0, 4}), Error);
}

TEST_F(ComparableTest, EmptyQueryPool) {
  query.records.clear();
  try {
    ComparableSampler sampler(view(support), view(query));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyQuerySet);
  }
}

}  // namespace
}  // namespace fewshot
