// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include "fudoba/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "fudoba/error.hpp"
#include "fudoba/parallel.hpp"
#include "fudoba/random.hpp"

namespace fudoba {
namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// z(i, c) = bias(c) + Σ_j x(i, j) w(j, c), accumulated with j ascending.
// The inner loop runs over rows so it vectorizes without reordering any sum.
void compute_logits(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                    Eigen::MatrixXd& z) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index classes = w.cols();
  z.resize(n, classes);
  for (Eigen::Index c = 0; c < classes; ++c) {
    double* zc = z.col(c).data();
    std::fill(zc, zc + n, b[c]);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double wjc = w(j, c);
      const double* xj = x.col(j).data();
      for (Eigen::Index i = 0; i < n; ++i) zc[i] += xj[i] * wjc;
    }
  }
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& z) {
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < z.cols(); ++c) {
      if (z(i, c) > z(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

void check_labels(std::span<const int> y, int num_classes, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(y.size()) != rows) {
    throw Error(ErrorCode::kDimensionMismatch, "feature rows and labels differ in length");
  }
  std::vector<char> present(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
  for (int label : y) {
    if (label < 0 || label >= num_classes) {
      throw Error(ErrorCode::kInvalidArgument, "label index out of range");
    }
    present[static_cast<std::size_t>(label)] = 1;
  }
  if (std::count(present.begin(), present.end(), 1) < 2) {
    throw Error(ErrorCode::kSingleClass, "training data holds fewer than two classes");
  }
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

}  // namespace

void ClassifierSpec::validate() const {
  if (!(l2_lambda >= 0.0) || max_iters < 1 || !(tolerance >= 0.0) || !(learning_rate > 0.0) ||
      !(time_limit_seconds >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "classifier spec needs l2_lambda >= 0, tolerance >= 0 and positive iters/rate");
  }
}

SoftmaxRegression::SoftmaxRegression(ClassifierSpec spec) : spec_(spec) { spec_.validate(); }

std::unique_ptr<Classifier> SoftmaxRegression::clone_untrained() const {
  return std::make_unique<SoftmaxRegression>(spec_);
}

void SoftmaxRegression::fit(const Eigen::MatrixXd& x, std::span<const int> y, int num_classes) {
  check_labels(y, num_classes, x.rows());
  if (!x.allFinite()) throw Error(ErrorCode::kNonFiniteValue, "classifier features");

  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index classes = num_classes;
  const double inv_n = 1.0 / static_cast<double>(n);
  const RowMajorMatrix x_rows = x;

  weights_ = Eigen::MatrixXd::Zero(d, classes);
  bias_ = Eigen::VectorXd::Zero(classes);
  iterations_ = 0;
  truncated_ = false;

  const auto start = std::chrono::steady_clock::now();
  Eigen::MatrixXd z;
  Eigen::MatrixXd residual(n, classes);
  Eigen::MatrixXd grad_w(d, classes);
  Eigen::VectorXd grad_b(classes);

  for (int iter = 0; iter < spec_.max_iters; ++iter) {
    compute_logits(x, weights_, bias_, z);
    for (Eigen::Index i = 0; i < n; ++i) {
      double top = z(i, 0);
      for (Eigen::Index c = 1; c < classes; ++c) top = std::max(top, z(i, c));
      double total = 0.0;
      for (Eigen::Index c = 0; c < classes; ++c) {
        residual(i, c) = std::exp(z(i, c) - top);
        total += residual(i, c);
      }
      for (Eigen::Index c = 0; c < classes; ++c) {
        double p = residual(i, c) / total;
        if (c == y[static_cast<std::size_t>(i)]) p -= 1.0;
        residual(i, c) = p * inv_n;
      }
    }

    // grad_w(j, c) = Σ_i x(i, j) r(i, c) with i ascending; vectorized over j.
    grad_w.setZero();
    grad_b.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* xi = x_rows.row(i).data();
      for (Eigen::Index c = 0; c < classes; ++c) {
        const double ric = residual(i, c);
        grad_b[c] += ric;
        for (Eigen::Index j = 0; j < d; ++j) grad_w(j, c) += xi[j] * ric;
      }
    }
    grad_w += spec_.l2_lambda * weights_;

    double grad_norm = grad_b.cwiseAbs().maxCoeff();
    if (d > 0) grad_norm = std::max(grad_norm, grad_w.cwiseAbs().maxCoeff());
    if (grad_norm < spec_.tolerance) break;

    weights_ -= spec_.learning_rate * grad_w;
    bias_ -= spec_.learning_rate * grad_b;
    iterations_ = iter + 1;

    if (spec_.time_limit_seconds > 0.0 && (iter & 15) == 15) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      if (elapsed.count() > spec_.time_limit_seconds) {
        truncated_ = true;
        break;
      }
    }
  }
}

Eigen::MatrixXd SoftmaxRegression::logits(const Eigen::MatrixXd& x) const {
  if (x.cols() != weights_.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature count differs from the fitted model");
  }
  Eigen::MatrixXd z;
  compute_logits(x, weights_, bias_, z);
  return z;
}

std::vector<int> SoftmaxRegression::predict(const Eigen::MatrixXd& x) const {
  return argmax_rows(logits(x));
}

void SoftmaxRegression::save(const std::filesystem::path& path) const {
  EmbeddingMatrix m;
  m.modality_name = "model";
  m.data.resize(weights_.rows() + 1, weights_.cols());
  m.data.topRows(weights_.rows()) = weights_;
  m.data.row(weights_.rows()) = bias_.transpose();
  for (Eigen::Index j = 0; j < weights_.rows(); ++j) m.row_ids.push_back("w" + std::to_string(j));
  m.row_ids.push_back("bias");
  save_embedding_matrix(m, path, MatrixFormat::kBinary);
}

SoftmaxRegression SoftmaxRegression::load(const std::filesystem::path& path,
                                          ClassifierSpec spec) {
  auto m = load_embedding_matrix(path, MatrixFormat::kBinary);
  if (m.row_ids.back() != "bias") {
    throw Error(ErrorCode::kParse, path.string() + " is not a saved model");
  }
  SoftmaxRegression model(spec);
  model.weights_ = m.data.topRows(m.rows() - 1);
  model.bias_ = m.data.row(m.rows() - 1).transpose();
  return model;
}

Folds stratified_folds(std::span<const int> class_indices, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k must be >= 2");
  if (class_indices.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::kInsufficientData, "fewer samples than folds");
  }
  int num_classes = 0;
  for (int c : class_indices) {
    if (c < 0) throw Error(ErrorCode::kInvalidArgument, "negative class index");
    num_classes = std::max(num_classes, c + 1);
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < class_indices.size(); ++i) {
    members[static_cast<std::size_t>(class_indices[i])].push_back(i);
  }

  Rng rng(seed);
  Folds folds(static_cast<std::size_t>(k));
  std::size_t next_fold = 0;
  for (auto& group : members) {
    shuffle(std::span<std::size_t>(group), rng);
    for (std::size_t idx : group) {
      folds[next_fold].push_back(idx);
      next_fold = (next_fold + 1) % folds.size();
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

Folds stratified_folds(const LabeledDataset& labels, int k, std::uint64_t seed) {
  auto idx = labels.class_indices();
  return stratified_folds(idx, k, seed);
}

MacroScores macro_scores(std::span<const int> y_true, std::span<const int> y_pred,
                         int num_classes) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "y_true and y_pred differ in length");
  }
  if (num_classes < 1) throw Error(ErrorCode::kInvalidArgument, "empty class set");
  std::vector<std::size_t> tp(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::size_t> predicted(tp.size(), 0);
  std::vector<std::size_t> actual(tp.size(), 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw Error(ErrorCode::kInvalidArgument, "label outside the class set");
    }
    ++actual[static_cast<std::size_t>(t)];
    ++predicted[static_cast<std::size_t>(p)];
    if (t == p) ++tp[static_cast<std::size_t>(t)];
  }
  MacroScores out;
  for (std::size_t c = 0; c < tp.size(); ++c) {
    const double prec = predicted[c] ? static_cast<double>(tp[c]) / static_cast<double>(predicted[c]) : 0.0;
    const double rec = actual[c] ? static_cast<double>(tp[c]) / static_cast<double>(actual[c]) : 0.0;
    const double f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    out.precision += prec;
    out.recall += rec;
    out.f1 += f1;
  }
  const double n = static_cast<double>(num_classes);
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

MacroScores macro_scores(std::span<const std::string> y_true, std::span<const std::string> y_pred,
                         std::span<const std::string> class_set) {
  auto to_index = [&](std::span<const std::string> labels) {
    std::vector<int> out;
    out.reserve(labels.size());
    for (const auto& label : labels) {
      auto it = std::find(class_set.begin(), class_set.end(), label);
      if (it == class_set.end()) {
        throw Error(ErrorCode::kInvalidArgument, "label '" + label + "' outside the class set");
      }
      out.push_back(static_cast<int>(it - class_set.begin()));
    }
    return out;
  };
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "y_true and y_pred differ in length");
  }
  auto t = to_index(y_true);
  auto p = to_index(y_pred);
  return macro_scores(t, p, static_cast<int>(class_set.size()));
}

void CVConfig::validate() const {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k must be >= 2");
  classifier.validate();
}

nlohmann::ordered_json to_json(const EvalResult& result) {
  nlohmann::ordered_json j;
  j["fold_scores"] = result.fold_scores;
  j["mean_f1"] = result.mean_f1;
  j["macro_precision"] = result.macro_precision;
  j["macro_recall"] = result.macro_recall;
  j["truncated"] = result.truncated;
  return j;
}

EvalResult evaluate_objective(const Eigen::MatrixXd& x, std::span<const int> y, int num_classes,
                              const CVConfig& cv) {
  cv.validate();
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature rows and labels differ in length");
  }
  const Folds folds = stratified_folds(y, cv.k, cv.seed);
  const std::size_t n = y.size();

  struct FoldOutcome {
    double f1 = 0.0;
    std::vector<int> predictions;
    bool truncated = false;
  };
  std::vector<FoldOutcome> outcomes(folds.size());
  auto model = std::make_shared<SoftmaxRegression>(cv.classifier);

  // Index folds.size() is the refit on every row.
  parallel_for(folds.size() + 1, cv.threads, [&](std::size_t f) {
    if (f == folds.size()) {
      model->fit(x, y, num_classes);
      return;
    }
    std::vector<char> held_out(n, 0);
    for (auto i : folds[f]) held_out[i] = 1;
    std::vector<std::size_t> train_rows;
    train_rows.reserve(n - folds[f].size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!held_out[i]) train_rows.push_back(i);
    }
    std::vector<int> train_y;
    train_y.reserve(train_rows.size());
    for (auto i : train_rows) train_y.push_back(y[i]);
    std::vector<int> val_y;
    val_y.reserve(folds[f].size());
    for (auto i : folds[f]) val_y.push_back(y[i]);

    SoftmaxRegression fold_model(cv.classifier);
    fold_model.fit(take_rows(x, train_rows), train_y, num_classes);
    auto& out = outcomes[f];
    out.predictions = fold_model.predict(take_rows(x, folds[f]));
    out.f1 = macro_scores(val_y, out.predictions, num_classes).f1;
    out.truncated = fold_model.truncated();
  });

  EvalResult result;
  std::vector<int> pooled(n, 0);
  double total = 0.0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    result.fold_scores.push_back(outcomes[f].f1);
    total += outcomes[f].f1;
    result.truncated = result.truncated || outcomes[f].truncated;
    for (std::size_t r = 0; r < folds[f].size(); ++r) pooled[folds[f][r]] = outcomes[f].predictions[r];
  }
  result.mean_f1 = total / static_cast<double>(folds.size());
  const auto pooled_scores = macro_scores(y, pooled, num_classes);
  result.macro_precision = pooled_scores.precision;
  result.macro_recall = pooled_scores.recall;
  result.truncated = result.truncated || model->truncated();
  result.fitted_model = std::move(model);
  return result;
}

EvalResult evaluate_objective(const FusedDataset& fused, const CVConfig& cv) {
  const auto y = fused.labels.class_indices();
  return evaluate_objective(fused.x, y, static_cast<int>(fused.labels.num_classes()), cv);
}

}  // namespace fudoba
