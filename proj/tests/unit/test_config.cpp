// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include <gtest/gtest.h>

#include "fudoba/config.hpp"
#include "fudoba/error.hpp"
#include "fudoba/random.hpp"

namespace fudoba {
namespace {

TEST(Toml, ParsesScalarsArraysAndSections) {
  const auto doc = TomlDocument::parse(R"(
# comment
title = "top"   # trailing comment
[search]
budget = 40
alpha_choices = [0.0, 0.5, 1.0]
l_choices = [8, 16]
flag = true
name = "with # hash"
big = 1_000
)");
  EXPECT_EQ(doc.find("title")->as_string(), "top");
  EXPECT_EQ(doc.find("search.budget")->as_int(), 40);
  EXPECT_EQ(doc.find("search.alpha_choices")->as_double_array(), (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(doc.find("search.l_choices")->as_int_array(), (std::vector<std::int64_t>{8, 16}));
  EXPECT_TRUE(doc.find("search.flag")->as_bool());
  EXPECT_EQ(doc.find("search.name")->as_string(), "with # hash");
  EXPECT_EQ(doc.find("search.big")->as_int(), 1000);
  EXPECT_EQ(doc.find("search.budget")->as_double(), 40.0);
  EXPECT_EQ(doc.keys("search").front(), "budget");
}

TEST(Toml, RejectsUnsupportedSyntax) {
  EXPECT_THROW(TomlDocument::parse("[a.b]\nx = 1\n"), Error);
  EXPECT_THROW(TomlDocument::parse("x = {a = 1}\n"), Error);
  EXPECT_THROW(TomlDocument::parse("x = [1,\n2]\n"), Error);
  EXPECT_THROW(TomlDocument::parse("x = 1\nx = 2\n"), Error);
  EXPECT_THROW(TomlDocument::parse("x = nope\n"), Error);
  EXPECT_THROW(TomlDocument::parse("x = \"unterminated\n"), Error);
}

TEST(Toml, TypeMismatch) {
  const auto doc = TomlDocument::parse("x = \"s\"\n");
  EXPECT_THROW(doc.find("x")->as_int(), Error);
}

TEST(ExperimentConfigTest, AppliesSectionsAndResolvesPaths) {
  const auto doc = TomlDocument::parse(R"(
[data]
labels = "labels.csv"
[modalities]
llm = "llm.fdb"
kg = "/abs/kg.csv"
[search]
budget = 20
n_init = 4
l_choices = [8, 16]
[run]
seed = 42
threads = 2
[cv]
folds = 3
[classifier]
l2_lambda = 0.1
[norm]
w1 = 0.3
w2 = 0.7
)");
  ExperimentConfig cfg;
  cfg.apply(doc, "/base");
  ASSERT_EQ(cfg.modalities.size(), 2u);
  EXPECT_EQ(cfg.modalities[0].first, "llm");
  EXPECT_EQ(cfg.modalities[0].second, "/base/llm.fdb");
  EXPECT_EQ(cfg.modalities[1].second, "/abs/kg.csv");
  EXPECT_EQ(cfg.labels, "/base/labels.csv");
  EXPECT_EQ(cfg.budget, 20);
  EXPECT_EQ(cfg.n_init, 4);
  EXPECT_EQ(cfg.l_choices, (std::vector<int>{8, 16}));
  EXPECT_EQ(cfg.require_seed(), 42u);
  EXPECT_EQ(cfg.threads, 2);
  EXPECT_EQ(cfg.classifier.l2_lambda, 0.1);
  EXPECT_EQ(cfg.norm.w1, 0.3);
  const auto cv = cfg.cv_config();
  EXPECT_EQ(cv.k, 3);
  EXPECT_EQ(cv.seed, derive_seed(42, "folds"));
  EXPECT_EQ(cfg.search_space().modalities, (std::vector<std::string>{"llm", "kg"}));
}

TEST(ExperimentConfigTest, SeedIsMandatory) {
  ExperimentConfig cfg;
  EXPECT_THROW(cfg.require_seed(), Error);
}

TEST(ExperimentConfigTest, UnknownKeysAndSecretsRejected) {
  ExperimentConfig cfg;
  EXPECT_THROW(cfg.apply(TomlDocument::parse("[search]\nbudgett = 3\n"), ""), Error);
  EXPECT_THROW(cfg.apply(TomlDocument::parse("[embed]\napi_key = \"x\"\n"), ""), Error);
}

TEST(ExperimentConfigTest, MissingFilesFailValidation) {
  ExperimentConfig cfg;
  cfg.seed = 1;
  cfg.modalities = {{"llm", "/nonexistent/llm.fdb"}};
  cfg.labels = "/nonexistent/labels.csv";
  try {
    cfg.validate_for_run();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kValidation);
  }
}

}  // namespace
}  // namespace fudoba
