// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "fudoba/bayesopt.hpp"

namespace fudoba {

/// Scores of several methods on several datasets; higher is better.
struct ScoreTable {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  Eigen::MatrixXd scores;  ///< datasets × methods

  void validate() const;
};

/// CSV with header `dataset,<method>,...` and one row per dataset.
ScoreTable load_score_table(const std::filesystem::path& path);

enum class FriedmanPValue {
  kChiSquare,     ///< χ²_F with k−1 degrees of freedom
  kImanDavenport  ///< F_F with (k−1, (k−1)(N−1)) degrees of freedom
};

struct RankSummary {
  std::vector<std::string> methods;
  std::vector<double> avg_ranks;
  double friedman_statistic = 0.0;
  /// Set for the Iman-Davenport variant.
  std::optional<double> iman_davenport_statistic;
  double p_value = 1.0;
  double critical_difference = 0.0;
  double alpha = 0.05;
  std::vector<std::pair<std::string, std::string>> significant_pairs;
};

/// Per-dataset ranks (1 = best) with average ranks for ties.
Eigen::MatrixXd rank_rows(const Eigen::MatrixXd& scores);

/// Two-tailed Nemenyi critical value q_α for k methods; k in [2, 10],
/// alpha in {0.05, 0.10}.
double nemenyi_q(int k, double alpha);

RankSummary friedman_nemenyi(const ScoreTable& table, double alpha = 0.05,
                             FriedmanPValue mode = FriedmanPValue::kChiSquare);

nlohmann::ordered_json to_json(const RankSummary& summary);
std::string rank_report_markdown(const RankSummary& summary);

struct ImportanceOptions {
  int trees = 100;
  int max_depth = 4;
  std::uint64_t seed = 0;
};

struct ParameterImportance {
  std::vector<std::string> parameters;
  /// Signed Spearman correlation with the objective; 0 when either side is constant.
  std::vector<double> spearman;
  /// |spearman| normalized to sum to 1 (all zero when there is no signal).
  std::vector<double> correlation_share;
  /// Impurity decrease of a bagged regression-tree ensemble, summing to 1
  /// (uniform when no split reduces impurity).
  std::vector<double> forest_importance;
};

/// Needs at least 10 trials. Features are the encoded config coordinates.
ParameterImportance parameter_importance(const std::vector<TrialRecord>& trace,
                                         const ThetaEncoding& encoding,
                                         const ImportanceOptions& options = {});
/// Same analysis on a raw feature matrix (rows = trials).
ParameterImportance parameter_importance(const Eigen::MatrixXd& features,
                                         const std::vector<double>& scores,
                                         std::vector<std::string> names,
                                         const ImportanceOptions& options = {});

nlohmann::ordered_json to_json(const ParameterImportance& importance);

/// Spearman rank correlation with average ranks for ties.
double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b);

/// One row of a results table: the fusion settings and macro scores of a method.
struct ReportRow {
  std::string dataset;
  std::string method;
  std::optional<FusionConfig> config;  ///< absent for unweighted baselines
  int l_final = 0;
  std::optional<double> f1;
  std::optional<double> precision;
  std::optional<double> recall;
};

enum class ReportFormat { kMarkdown, kCsv };

/// Columns: alpha and l per modality, l_final, F1/Prec./Rec. in percent with
/// two decimals. Missing values render as an em dash.
std::string render_report(const std::vector<ReportRow>& rows, ReportFormat format);
void emit_report(const std::vector<ReportRow>& rows, ReportFormat format,
                 const std::filesystem::path& path);

inline constexpr const char* kMissingValue = "—";

}  // namespace fudoba
