// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "fudoba/embedding_store.hpp"
#include "fudoba/fusion.hpp"

namespace fudoba {

struct ClassifierSpec {
  double l2_lambda = 1e-2;
  int max_iters = 500;
  double tolerance = 1e-6;
  double learning_rate = 0.5;
  /// Soft wall-clock limit per fit; <= 0 disables it.
  double time_limit_seconds = 300.0;

  void validate() const;
};

/// Anything that can be fit on (X, class index) and predict class indices.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const Eigen::MatrixXd& x, std::span<const int> y, int num_classes) = 0;
  virtual std::vector<int> predict(const Eigen::MatrixXd& x) const = 0;
  /// True when the last fit stopped on the time limit.
  virtual bool truncated() const { return false; }
  virtual std::unique_ptr<Classifier> clone_untrained() const = 0;
};

/// Multinomial logistic regression trained by full-batch gradient descent
/// from zero weights on mean cross-entropy + l2_lambda·|W|²/2 (bias is not
/// penalized). Stops at max_iters or when the gradient's max-abs entry drops
/// below tolerance.
///
/// Every dot product is accumulated in feature order, so appending all-zero
/// feature columns leaves the logits, and hence every prediction, unchanged
/// bit for bit.
class SoftmaxRegression final : public Classifier {
 public:
  explicit SoftmaxRegression(ClassifierSpec spec = {});

  void fit(const Eigen::MatrixXd& x, std::span<const int> y, int num_classes) override;
  std::vector<int> predict(const Eigen::MatrixXd& x) const override;
  bool truncated() const override { return truncated_; }
  std::unique_ptr<Classifier> clone_untrained() const override;

  /// Row-major class scores, N × C.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const;

  const Eigen::MatrixXd& weights() const { return weights_; }  ///< d × C
  const Eigen::VectorXd& bias() const { return bias_; }        ///< C
  int iterations() const { return iterations_; }
  const ClassifierSpec& spec() const { return spec_; }

  /// FDB1 matrix with rows w0..w{d-1} and a final "bias" row; one column per class.
  void save(const std::filesystem::path& path) const;
  static SoftmaxRegression load(const std::filesystem::path& path, ClassifierSpec spec = {});

 private:
  ClassifierSpec spec_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
  int iterations_ = 0;
  bool truncated_ = false;
};

/// Folds as lists of row indices, each sorted ascending.
using Folds = std::vector<std::vector<std::size_t>>;

/// Per class, a seeded Fisher-Yates shuffle followed by round-robin dealing
/// into k folds; the dealing position carries over between classes so fold
/// sizes differ by at most one.
Folds stratified_folds(std::span<const int> class_indices, int k, std::uint64_t seed);
Folds stratified_folds(const LabeledDataset& labels, int k, std::uint64_t seed);

struct MacroScores {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Unweighted means over all `num_classes` classes; 0/0 counts as 0.
MacroScores macro_scores(std::span<const int> y_true, std::span<const int> y_pred,
                         int num_classes);
MacroScores macro_scores(std::span<const std::string> y_true,
                         std::span<const std::string> y_pred,
                         std::span<const std::string> class_set);

struct CVConfig {
  int k = 5;
  std::uint64_t seed = 0;
  ClassifierSpec classifier;
  /// Worker threads for fold training. Results do not depend on it.
  int threads = 1;

  void validate() const;
};

struct EvalResult {
  std::vector<double> fold_scores;
  double mean_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  bool truncated = false;
  std::shared_ptr<const SoftmaxRegression> fitted_model;
};

nlohmann::ordered_json to_json(const EvalResult& result);

/// k-fold CV macro-F1 of the classifier on `fused`, pooled out-of-fold
/// precision/recall, and a refit on all rows.
EvalResult evaluate_objective(const FusedDataset& fused, const CVConfig& cv);
/// Same, on a bare matrix with class indices.
EvalResult evaluate_objective(const Eigen::MatrixXd& x, std::span<const int> y, int num_classes,
                              const CVConfig& cv);

}  // namespace fudoba
