// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include <gtest/gtest.h>

#include "fudoba/error.hpp"
#include "fudoba/evaluator.hpp"
#include "fudoba/fusion.hpp"
#include "synthetic.hpp"

namespace fudoba {
namespace {

using testing::make_random_set;

FusionConfig config_of(std::initializer_list<ModalitySetting> entries) { return FusionConfig{entries}; }

TEST(SearchSpaceTest, DefaultSizes) {
  EXPECT_EQ(SearchSpace::with_defaults({"llm", "kg", "lockg"}).size(), 35937u);
  EXPECT_EQ(enumerate_configs(SearchSpace::with_defaults({"llm", "kg"})).size(), 1089u);
  SearchSpace tiny;
  tiny.modalities = {"llm"};
  tiny.l_choices = {16};
  tiny.alpha_choices = {0.0, 1.0};
  EXPECT_EQ(enumerate_configs(tiny).size(), 2u);
}

TEST(SearchSpaceTest, IndexRoundTripAndOrder) {
  const auto space = SearchSpace::with_defaults({"llm", "kg"});
  const auto all = enumerate_configs(space);
  for (std::size_t i = 0; i < all.size(); i += 37) {
    EXPECT_EQ(space.index_of(all[i]), i);
    EXPECT_EQ(space.config_at(i), all[i]);
  }
  // Last coordinate (alpha of the last modality) varies fastest.
  EXPECT_EQ(all[0].entries[1].alpha, 0.0);
  EXPECT_EQ(all[1].entries[1].alpha, 0.1);
  EXPECT_EQ(all[1].entries[0].alpha, 0.0);
}

TEST(SearchSpaceTest, IndexOfUnknownConfig) {
  const auto space = SearchSpace::with_defaults({"llm"});
  EXPECT_FALSE(space.index_of(config_of({{"llm", 17, 0.5}})).has_value());
}

TEST(FusionConfigTest, OutputDimCountsActiveModalities) {
  EXPECT_EQ(config_of({{"llm", 64, 1.0}, {"kg", 32, 0.8}, {"lockg", 16, 0.1}}).output_dim(), 112);
  EXPECT_EQ(config_of({{"llm", 32, 0.7}, {"kg", 32, 0.3}, {"lockg", 16, 0.0}}).output_dim(), 64);
}

TEST(FusionConfigTest, ValidationRejectsOutOfRange) {
  EXPECT_THROW(config_of({{"llm", 0, 0.5}}).validate(), Error);
  EXPECT_THROW(config_of({{"llm", 16, 1.5}}).validate(), Error);
  EXPECT_THROW(config_of({{"llm", 16, 0.5}, {"llm", 16, 0.5}}).validate(), Error);
}

TEST(FusionConfigTest, JsonRoundTripKeepsOrder) {
  const auto c = config_of({{"kg", 32, 0.3}, {"llm", 64, 1.0}});
  const auto j = to_json(c);
  EXPECT_EQ(j.dump(), R"({"modalities":{"kg":{"l":32,"alpha":0.3},"llm":{"l":64,"alpha":1.0}}})");
  EXPECT_EQ(fusion_config_from_json(nlohmann::json::parse(j.dump())).entries.size(), 2u);
}

TEST(Fuse, TableThreeDimensions) {
  const auto set = make_random_set(150, {80, 40, 24}, 2, 1);
  const auto books = fuse(set.matrices, set.labels, config_of({{"llm", 64, 1.0}, {"kg", 32, 0.8}, {"lockg", 16, 0.1}}));
  EXPECT_EQ(books.x.cols(), 112);
  const std::vector<EmbeddingMatrix> two(set.matrices.begin(), set.matrices.begin() + 2);
  const auto dvd = fuse(two, set.labels, config_of({{"llm", 32, 0.7}, {"kg", 32, 0.3}}));
  EXPECT_EQ(dvd.x.cols(), 64);
}

TEST(Fuse, SpansAndRowNorms) {
  const auto set = make_random_set(60, {20, 12, 8}, 3, 2);
  const auto cfg = config_of({{"llm", 16, 0.5}, {"kg", 16, 0.0}, {"lockg", 4, 1.0}});
  const auto fused = fuse(set.matrices, set.labels, cfg);
  ASSERT_EQ(fused.column_spans.size(), 2u);
  EXPECT_EQ(fused.column_spans[0], (ColumnSpan{"llm", 0, 16}));
  EXPECT_EQ(fused.column_spans[1], (ColumnSpan{"lockg", 16, 20}));
  for (Eigen::Index r = 0; r < fused.x.rows(); ++r) {
    const auto row = fused.x.row(r);
    EXPECT_NEAR(0.5 * row.lpNorm<1>() + 0.5 * row.norm(), 1.0, 1e-10);
  }
}

TEST(Fuse, ExclusionIsBitIdentical) {
  const auto set = make_random_set(80, {20, 15, 10}, 2, 3);
  const auto with_zero = fuse(set.matrices, set.labels, config_of({{"llm", 16, 0.6}, {"kg", 8, 0.0}, {"lockg", 8, 0.9}}));
  const std::vector<EmbeddingMatrix> without{set.matrices[0], set.matrices[2]};
  const auto removed = fuse(without, set.labels, config_of({{"llm", 16, 0.6}, {"lockg", 8, 0.9}}));
  EXPECT_EQ(with_zero.x, removed.x);
}

TEST(Fuse, ScaledSpansBeforeNormalization) {
  const auto set = make_random_set(50, {12, 10}, 2, 4);
  const ProjectionCache cache(set.matrices, set.labels, 8, {});
  std::vector<ColumnSpan> spans;
  const auto scaled = cache.scaled_concatenation(config_of({{"llm", 8, 0.3}, {"kg", 4, 1.0}}), &spans);
  const auto unit = cache.scaled_concatenation(config_of({{"llm", 8, 1.0}, {"kg", 4, 1.0}}));
  EXPECT_LT((scaled.leftCols(8) - 0.3 * unit.leftCols(8)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(scaled.rightCols(4), unit.rightCols(4));
}

TEST(Fuse, SingleModalityIsDoublyNormalizedProjection) {
  const auto set = make_random_set(40, {10}, 2, 5);
  const auto fused = fuse(set.matrices, set.labels, config_of({{"llm", 10, 1.0}}));
  const auto normalized = normalized_rows(set.matrices[0].data);
  const auto expected = normalized_rows(project(normalized, fit_truncated_svd(normalized, 10)));
  EXPECT_LT((fused.x - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fuse, AllZeroAlphaRejected) {
  const auto set = make_random_set(30, {10, 10}, 2, 6);
  try {
    fuse(set.matrices, set.labels, config_of({{"llm", 8, 0.0}, {"kg", 8, 0.0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoActiveModalities);
  }
}

TEST(Fuse, RankAboveBoundIsClamped) {
  const auto set = make_random_set(30, {6, 10}, 2, 7);
  const auto fused = fuse(set.matrices, set.labels, config_of({{"llm", 16, 1.0}, {"kg", 8, 1.0}}));
  EXPECT_EQ(fused.x.cols(), 6 + 8);
}

TEST(Fuse, UnalignedInputsRejected) {
  auto set = make_random_set(30, {6, 6}, 2, 8);
  std::swap(set.matrices[1].row_ids[0], set.matrices[1].row_ids[1]);
  try {
    fuse(set.matrices, set.labels, config_of({{"llm", 4, 1.0}, {"kg", 4, 1.0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnalignedInputs);
  }
}

TEST(Fuse, DeterministicAcrossCalls) {
  const auto set = make_random_set(70, {20, 20, 20}, 3, 9);
  const auto cfg = config_of({{"llm", 16, 0.4}, {"kg", 16, 0.2}, {"lockg", 16, 1.0}});
  EXPECT_EQ(fuse(set.matrices, set.labels, cfg).x, fuse(set.matrices, set.labels, cfg).x);
}

TEST(ConcatProject, DefaultDimension) {
  const auto set = make_random_set(100, {40, 30, 20}, 2, 10);
  const auto fused = fuse_concat_project(set.matrices, set.labels, kConcatProjectDefaultDim);
  EXPECT_EQ(fused.x.cols(), 32);
  EXPECT_TRUE(fused.config.entries.empty());
}

TEST(ConcatProject, GramPreservedAtFullRank) {
  Rng rng(11);
  auto set = make_random_set(60, {12, 10}, 2, 11);
  for (auto& m : set.matrices) m.data = testing::gaussian_matrix(60, 5, rng) * testing::gaussian_matrix(5, m.dim(), rng);
  // Concatenation has rank <= 10 < 32, so the projection keeps all inner products.
  Eigen::MatrixXd concat(60, 22);
  concat << normalized_rows(set.matrices[0].data), normalized_rows(set.matrices[1].data);
  const auto fused = fuse_concat_project(set.matrices, set.labels, 20);
  const auto p = project(concat, fit_truncated_svd(concat, 20));
  EXPECT_LT((p * p.transpose() - concat * concat.transpose()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(fused.x.cols(), 20);
}

TEST(ConcatProject, SingleModalityMatchesFuse) {
  const auto set = make_random_set(50, {24}, 2, 12);
  const auto cp = fuse_concat_project(set.matrices, set.labels, 16);
  const auto fu = fuse(set.matrices, set.labels, config_of({{"llm", 16, 1.0}}));
  EXPECT_LT((cp.x - fu.x).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace fudoba
