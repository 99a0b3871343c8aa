// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "fudoba/analysis.hpp"
#include "fudoba/error.hpp"
#include "fudoba/io_util.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace fudoba {
namespace {

ScoreTable table_of(const Eigen::MatrixXd& scores) {
  ScoreTable t;
  for (Eigen::Index c = 0; c < scores.cols(); ++c) t.methods.push_back("m" + std::to_string(c));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) t.datasets.push_back("d" + std::to_string(r));
  t.scores = scores;
  return t;
}

TEST(Friedman, AllTies) {
  const auto s = friedman_nemenyi(table_of(Eigen::MatrixXd::Constant(6, 4, 0.8)));
  EXPECT_EQ(s.friedman_statistic, 0.0);
  EXPECT_TRUE(s.significant_pairs.empty());
  for (double r : s.avg_ranks) EXPECT_EQ(r, 2.5);
}

TEST(Friedman, TwoMethodsOneDominates) {
  Eigen::MatrixXd scores(6, 2);
  for (int r = 0; r < 6; ++r) scores.row(r) << 0.9 + 0.01 * r, 0.5;
  const auto s = friedman_nemenyi(table_of(scores));
  EXPECT_EQ(s.avg_ranks, (std::vector<double>{1.0, 2.0}));
  EXPECT_NEAR(s.friedman_statistic, 6.0, 1e-12);
  // CD = 1.960 * sqrt(2*3/36) = 0.8002 < 1.
  EXPECT_NEAR(s.critical_difference, 1.960 * std::sqrt(6.0 / 36.0), 1e-12);
  ASSERT_EQ(s.significant_pairs.size(), 1u);
}

TEST(Friedman, ChiSquarePValue) {
  Eigen::MatrixXd scores(6, 2);
  for (int r = 0; r < 6; ++r) scores.row(r) << 1.0, 0.0;
  const auto s = friedman_nemenyi(table_of(scores));
  // Upper tail of chi-square(1) at 6 = erfc(sqrt(3)).
  EXPECT_NEAR(s.p_value, std::erfc(std::sqrt(3.0)), 1e-12);
}

TEST(Friedman, ImanDavenportVariant) {
  Rng rng(5);
  const auto t = table_of(testing::gaussian_matrix(6, 4, rng));
  const auto chi = friedman_nemenyi(t);
  const auto f = friedman_nemenyi(t, 0.05, FriedmanPValue::kImanDavenport);
  ASSERT_TRUE(f.iman_davenport_statistic.has_value());
  const double expected = 5.0 * chi.friedman_statistic / (6.0 * 3.0 - chi.friedman_statistic);
  EXPECT_NEAR(*f.iman_davenport_statistic, expected, 1e-12);
  EXPECT_GE(f.p_value, 0.0);
  EXPECT_LE(f.p_value, 1.0);
}

TEST(Friedman, MatchesBruteForceRanks) {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const auto k = 2 + static_cast<Eigen::Index>(uniform_below(rng, 3));
    const auto n = 3 + static_cast<Eigen::Index>(uniform_below(rng, 4));
    Eigen::MatrixXd scores(n, k);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < k; ++c) scores(r, c) = static_cast<double>(uniform_below(rng, 4)) / 4.0;
    }
    const auto s = friedman_nemenyi(table_of(scores));
    const auto ranks = testing::brute_force_ranks(scores);
    long double sum_sq = 0;
    std::vector<long double> avg(static_cast<std::size_t>(k), 0);
    for (const auto& row : ranks) {
      for (Eigen::Index c = 0; c < k; ++c) avg[c] += row[c] / n;
    }
    for (auto a : avg) sum_sq += a * a;
    const long double stat = 12.0L * n / (k * (k + 1.0L)) * (sum_sq - k * (k + 1.0L) * (k + 1.0L) / 4.0L);
    EXPECT_NEAR(s.friedman_statistic, static_cast<double>(stat), 1e-9);
    const double cd = nemenyi_q(static_cast<int>(k), 0.05) * std::sqrt(k * (k + 1.0) / (6.0 * n));
    std::size_t pairs = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
      EXPECT_NEAR(s.avg_ranks[i], static_cast<double>(avg[i]), 1e-12);
      for (Eigen::Index j = i + 1; j < k; ++j) pairs += std::fabs(static_cast<double>(avg[i] - avg[j])) > cd;
    }
    EXPECT_EQ(s.significant_pairs.size(), pairs);
  }
}

TEST(Friedman, MonotoneTransformInvariance) {
  Rng rng(6);
  const Eigen::MatrixXd scores = testing::gaussian_matrix(6, 3, rng);
  const auto a = friedman_nemenyi(table_of(scores));
  const auto b = friedman_nemenyi(table_of(scores.array().exp().matrix() * 3.0));
  EXPECT_EQ(a.friedman_statistic, b.friedman_statistic);
  EXPECT_EQ(a.avg_ranks, b.avg_ranks);
}

TEST(Friedman, DegenerateTablesRejected) {
  EXPECT_THROW(friedman_nemenyi(table_of(Eigen::MatrixXd::Ones(1, 3))), Error);
  EXPECT_THROW(friedman_nemenyi(table_of(Eigen::MatrixXd::Ones(4, 1))), Error);
  EXPECT_THROW(nemenyi_q(11, 0.05), Error);
  EXPECT_THROW(nemenyi_q(3, 0.01), Error);
}

TEST(Friedman, NemenyiTableValues) {
  EXPECT_EQ(nemenyi_q(2, 0.05), 1.960);
  EXPECT_EQ(nemenyi_q(5, 0.05), 2.728);
  EXPECT_EQ(nemenyi_q(10, 0.05), 3.164);
  EXPECT_EQ(nemenyi_q(2, 0.10), 1.645);
  EXPECT_EQ(nemenyi_q(10, 0.10), 2.920);
}

TEST(ScoreTableTest, LoadFromCsv) {
  const auto path = std::filesystem::temp_directory_path() / "fudoba_scores.csv";
  std::ofstream(path) << "dataset,a,b\nx,0.9,0.8\ny,0.7,0.75\n";
  const auto t = load_score_table(path);
  EXPECT_EQ(t.methods, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.scores(1, 1), 0.75);
  std::ofstream(path) << "dataset,a,b\nx,0.9,0.8\n";
  EXPECT_THROW(load_score_table(path), Error);
}

TEST(Spearman, KnownValues) {
  EXPECT_NEAR(spearman_correlation({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-15);
  EXPECT_NEAR(spearman_correlation({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-15);
  EXPECT_EQ(spearman_correlation({1, 1, 1}, {1, 2, 3}), 0.0);
}

Eigen::MatrixXd random_features(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd f(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) f(r, c) = uniform01(rng);
  }
  return f;
}

TEST(Importance, SingleDriverRanksFirst) {
  const auto f = random_features(40, 6, 3);
  std::vector<double> y;
  for (Eigen::Index r = 0; r < 40; ++r) y.push_back(std::sin(2.0 * f(r, 3)));
  const auto imp = parameter_importance(f, y, {"a", "b", "c", "d", "e", "f"});
  for (std::size_t i = 0; i < 6; ++i) {
    if (i == 3) continue;
    EXPECT_GT(std::fabs(imp.spearman[3]), std::fabs(imp.spearman[i]));
    EXPECT_GT(imp.forest_importance[3], imp.forest_importance[i]);
  }
  double total = 0;
  for (double v : imp.forest_importance) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Importance, ConstantObjective) {
  const auto f = random_features(20, 4, 4);
  const auto imp = parameter_importance(f, std::vector<double>(20, 0.5), {"a", "b", "c", "d"});
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(imp.spearman[i], 0.0);
    EXPECT_NEAR(imp.forest_importance[i], 0.25, 0.1);
  }
}

TEST(Importance, DeterministicAndPermutationEquivariant) {
  const auto f = random_features(30, 4, 5);
  std::vector<double> y;
  for (Eigen::Index r = 0; r < 30; ++r) y.push_back(f(r, 0) + 0.5 * f(r, 2) * f(r, 1));
  const auto a = parameter_importance(f, y, {"a", "b", "c", "d"});
  const auto b = parameter_importance(f, y, {"a", "b", "c", "d"});
  EXPECT_EQ(a.forest_importance, b.forest_importance);
  const std::vector<int> perm{2, 0, 3, 1};
  Eigen::MatrixXd g(30, 4);
  for (int c = 0; c < 4; ++c) g.col(c) = f.col(perm[c]);
  const auto p = parameter_importance(g, y, {"c", "a", "d", "b"});
  for (int c = 0; c < 4; ++c) {
    EXPECT_EQ(p.spearman[c], a.spearman[perm[c]]);
    EXPECT_NEAR(p.forest_importance[c], a.forest_importance[perm[c]], 1e-12);
  }
}

TEST(Importance, TooFewTrials) {
  EXPECT_THROW(parameter_importance(random_features(9, 2, 1), std::vector<double>(9, 0.0), {"a", "b"}), Error);
}

TEST(Report, TableThreeRow) {
  ReportRow row;
  row.dataset = "Books";
  row.method = "FuDoBa";
  row.config = FusionConfig{{{"llm", 64, 1.0}, {"kg", 32, 0.8}, {"lockg", 16, 0.1}}};
  row.l_final = row.config->output_dim();
  row.f1 = 0.934;
  const auto md = render_report({row}, ReportFormat::kMarkdown);
  EXPECT_NE(md.find("| Books | FuDoBa | 1.0 | 0.8 | 0.1 | 64 | 32 | 16 | 112 | 93.40 | — | — |"), std::string::npos)
      << md;
  const auto csv = render_report({row}, ReportFormat::kCsv);
  EXPECT_NE(csv.find("Books,FuDoBa,1.0,0.8,0.1,64,32,16,112,93.40,—,—"), std::string::npos) << csv;
  EXPECT_EQ(render_report({row}, ReportFormat::kMarkdown), md);
}

TEST(Report, BaselineWithoutConfig) {
  ReportRow fud;
  fud.dataset = "Dvd";
  fud.method = "FuDoBa";
  fud.config = FusionConfig{{{"llm", 32, 0.7}, {"kg", 32, 0.3}}};
  fud.l_final = 64;
  ReportRow cp;
  cp.dataset = "Dvd";
  cp.method = "FuDoBa-CP";
  cp.l_final = 32;
  cp.f1 = 0.5;
  cp.precision = 0.25;
  cp.recall = 0.125;
  const auto md = render_report({fud, cp}, ReportFormat::kMarkdown);
  EXPECT_NE(md.find("| Dvd | FuDoBa-CP | — | — | — | — | 32 | 50.00 | 25.00 | 12.50 |"), std::string::npos) << md;
}

TEST(Report, EmitWritesFile) {
  ReportRow row;
  row.dataset = "x";
  row.method = "y";
  const auto path = std::filesystem::temp_directory_path() / "fudoba_report.md";
  emit_report({row}, ReportFormat::kMarkdown, path);
  EXPECT_EQ(read_file(path), render_report({row}, ReportFormat::kMarkdown));
}

}  // namespace
}  // namespace fudoba
