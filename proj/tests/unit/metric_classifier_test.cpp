#include "fewshot/metric_classifier.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fewshot/error.hpp"
#include "support/episodes.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace fewshot {
namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

ProjectionHead random_head(Rng& rng, std::size_t out, std::size_t in, bool bias) {
  ProjectionHead head(out, in, bias);
  for (double& w : head.weights()) w = rng.normal();
  for (double& b : head.bias()) b = rng.normal();
  return head;
}

TEST(ProjectionHead, IdentityAndScaledIdentity) {
  const std::vector<double> x{1.5, -2.0, 0.25};
  EXPECT_EQ(project(ProjectionHead::identity(3), x), x);
  auto twice = ProjectionHead::identity(3);
  for (std::size_t i = 0; i < 3; ++i) twice.weight(i, i) = 2.0;
  EXPECT_EQ(project(twice, x), (std::vector<double>{3.0, -4.0, 0.5}));
}

TEST(ProjectionHead, RectangularIdentityTruncatesOrPads) {
  const std::vector<double> x{1.0, 2.0, 3.0};
  EXPECT_EQ(project(ProjectionHead::identity(3, 2), x), (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(project(ProjectionHead::identity(3, 4), x), (std::vector<double>{1.0, 2.0, 3.0, 0.0}));
}

TEST(ProjectionHead, MatchesOracleMatvec) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t out = 1 + rng.uniform_index(12);
    const std::size_t in = 1 + rng.uniform_index(12);
    const auto head = random_head(rng, out, in, trial % 2 == 0);
    const auto x = random_vector(rng, in);
    const auto expected = oracle::matvec({head.weights().begin(), head.weights().end()},
                                         {head.bias().begin(), head.bias().end()}, out, in, x);
    const auto got = project(head, x);
    for (std::size_t i = 0; i < out; ++i) EXPECT_NEAR(got[i], expected[i], 1e-12);
  }
}

TEST(ProjectionHead, DimensionMismatch) {
  try {
    project(ProjectionHead::identity(3), std::vector<double>{1.0, 2.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(ProjectionHead, FileRoundTripIsBitExact) {
  Rng rng(3);
  testing::TempDir dir;
  for (bool bias : {false, true}) {
    auto head = random_head(rng, 5, 7, bias);
    head.weight(0, 0) = -0.0;
    head.weight(1, 1) = 5e-324;
    save_head(head, dir / "h.bin");
    const auto back = load_head(dir / "h.bin");
    EXPECT_EQ(encode_head(back), encode_head(head));
    EXPECT_EQ(std::signbit(back.weight(0, 0)), true);
  }
}

TEST(ProjectionHead, HeaderLayout) {
  const auto bytes = encode_head(ProjectionHead::identity(2, 3, true));
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 1 + 8 * (6 + 3));
  EXPECT_EQ(bytes.substr(0, 4), "PHD1");
  EXPECT_EQ(bytes[4], 3);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 1);
}

TEST(ProjectionHead, CorruptBlobsRejected) {
  const auto good = encode_head(ProjectionHead::identity(2));
  for (const std::string& bad : {std::string("PHD2") + good.substr(4), good.substr(0, good.size() - 1),
                                 good + "x", std::string("PH")}) {
    try {
      decode_head(bad);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kCorruptHeader);
    }
  }
  auto nan_head = ProjectionHead::identity(2);
  nan_head.weight(0, 1) = std::nan("");
  try {
    decode_head(encode_head(nan_head));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteValue);
  }
}

TEST(Prototypes, MeanOfProjectedSupports) {
  testing::EpisodeBuilder b(2);
  b.support(0, {1, 0}).support(0, {3, 2}).support(1, {0, 4}).support(1, {2, 0});
  auto head = ProjectionHead::identity(2);
  head.weight(0, 1) = 1.0;  // y = (x0 + x1, x1)
  const auto protos = compute_prototypes(b.episode(), head);
  ASSERT_EQ(protos.size(), 2u);
  EXPECT_EQ(std::vector<double>(protos.mean(0).begin(), protos.mean(0).end()),
            (std::vector<double>{3.0, 1.0}));
  EXPECT_EQ(std::vector<double>(protos.mean(1).begin(), protos.mean(1).end()),
            (std::vector<double>{3.0, 2.0}));
}

TEST(Prototypes, DegenerateMeanThrowsOnUse) {
  testing::EpisodeBuilder b(2);
  b.support(0, {1, 0}).support(0, {-1, 0}).support(1, {0, 1}).support(1, {0, 1});
  const auto protos = compute_prototypes(b.episode(), ProjectionHead::identity(2));
  try {
    score(std::vector<double>{1.0, 1.0}, protos, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateVector);
  }
}

TEST(Scoring, CosineOverTemperature) {
  const PrototypeSet protos(2, {2.0, 0.0, 1.0, 1.0});
  const auto s = score(std::vector<double>{3.0, 0.0}, protos, {0.5});
  EXPECT_DOUBLE_EQ(s[0], 2.0);
  EXPECT_NEAR(s[1], std::sqrt(0.5) / 0.5, 1e-15);
}

TEST(Scoring, ZeroQueryAndBadTemperature) {
  const PrototypeSet protos(2, {1.0, 0.0, 0.0, 1.0});
  try {
    score(std::vector<double>{0.0, 0.0}, protos, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateVector);
  }
  for (double tau : {0.0, -1.0, std::nan("")}) {
    try {
      score(std::vector<double>{1.0, 0.0}, protos, {tau});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    }
  }
}

TEST(Scoring, SoftmaxSumsToOneAndIsStable) {
  const auto p = softmax(std::vector<double>{1000.0, 999.0, -1000.0});
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-15);
  EXPECT_NEAR(p[0], 0.7310585786300049, 1e-15);
  EXPECT_NEAR(p[1], 0.2689414213699951, 1e-15);
  EXPECT_EQ(p[2], 0.0);
}

TEST(Scoring, TiesGoToLowestSlot) {
  EXPECT_EQ(argmax_slot(std::vector<double>{1.0, 3.0, 3.0}), 1u);
  EXPECT_EQ(argmax_slot(std::vector<double>{2.0, 2.0}), 0u);
  const PrototypeSet protos(2, {1.0, 0.0, 0.0, 1.0, 1.0, 0.0});
  EXPECT_EQ(predict_unit(std::vector<double>{1.0, 0.0}, protos, {}), 0u);
  EXPECT_EQ(classify(std::vector<double>{1.0, 0.0}, protos, {}).slot, 0u);
}

TEST(Scoring, ArgmaxInvariantToTemperatureAndAgreesWithOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t dim = 2 + rng.uniform_index(8);
    const std::size_t n_way = 2 + rng.uniform_index(6);
    std::vector<std::vector<double>> means;
    std::vector<double> flat;
    for (std::size_t n = 0; n < n_way; ++n) {
      means.push_back(random_vector(rng, dim));
      flat.insert(flat.end(), means.back().begin(), means.back().end());
    }
    const PrototypeSet protos(dim, flat);
    const auto q = random_vector(rng, dim);
    const auto expected = oracle::nearest_cosine(q, means);
    for (double tau : {0.01, 0.07, 1.0, 10.0}) {
      const auto c = classify(q, protos, {tau});
      EXPECT_EQ(c.slot, expected);
      EXPECT_EQ(predict_unit(normalized(q), protos, {tau}), expected);
      EXPECT_NEAR(std::accumulate(c.probabilities.begin(), c.probabilities.end(), 0.0), 1.0, 1e-12);
    }
  }
}

}  // namespace
}  // namespace fewshot
