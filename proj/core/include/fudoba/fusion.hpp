// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "fudoba/embedding_store.hpp"
#include "fudoba/numerics.hpp"

namespace fudoba {

struct ModalitySetting {
  std::string modality;
  int l = 0;           ///< projection dimension
  double alpha = 0.0;  ///< importance weight in [0, 1]

  friend bool operator==(const ModalitySetting&, const ModalitySetting&) = default;
};

/// Projection dimension and importance weight per modality, in the declared
/// modality order.
struct FusionConfig {
  std::vector<ModalitySetting> entries;

  const ModalitySetting* find(std::string_view modality) const;
  /// Σ l over modalities with alpha > 0.
  int output_dim() const;
  void validate() const;

  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

nlohmann::ordered_json to_json(const FusionConfig& config);
/// Accepts `{"modalities": {"llm": {"l": 64, "alpha": 1.0}, ...}}`.
FusionConfig fusion_config_from_json(const nlohmann::ordered_json& j);
FusionConfig load_fusion_config(const std::filesystem::path& path);

struct SearchSpace {
  std::vector<std::string> modalities;
  std::vector<int> l_choices{16, 32, 64};
  std::vector<double> alpha_choices{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

  static SearchSpace with_defaults(std::vector<std::string> modalities);

  void validate() const;
  std::size_t size() const;
  /// Config at `index` of the lexicographic enumeration: coordinates are
  /// (l_1..l_M, alpha_1..alpha_M), the last one varying fastest.
  FusionConfig config_at(std::size_t index) const;
  /// Inverse of config_at; nullopt if the config is not on the grid.
  std::optional<std::size_t> index_of(const FusionConfig& config) const;
};

/// Full Cartesian product of the search space, lexicographic.
std::vector<FusionConfig> enumerate_configs(const SearchSpace& space);

struct ColumnSpan {
  std::string modality;
  Eigen::Index begin = 0;
  Eigen::Index end = 0;  ///< one past the last column

  friend bool operator==(const ColumnSpan&, const ColumnSpan&) = default;
};

struct FusedDataset {
  Eigen::MatrixXd x;
  LabeledDataset labels;
  FusionConfig config;
  std::vector<ColumnSpan> column_spans;
  std::vector<std::string> row_ids;
};

/// Per-modality SVDs of the row-normalized inputs, fit once at the largest
/// rank any config can ask for. Fusing through the cache gives the same bits
/// as the free `fuse` function.
class ProjectionCache {
 public:
  ProjectionCache(std::span<const EmbeddingMatrix> matrices, const LabeledDataset& labels,
                  int max_rank, const NormWeights& weights);

  FusedDataset fuse(const FusionConfig& config) const;

  /// Alpha-scaled projections concatenated in modality order, before the
  /// final row normalization.
  Eigen::MatrixXd scaled_concatenation(const FusionConfig& config,
                                       std::vector<ColumnSpan>* spans = nullptr) const;

  const std::vector<std::string>& modalities() const { return names_; }
  const LabeledDataset& labels() const { return labels_; }

 private:
  struct Modality {
    Eigen::MatrixXd normalized;
    SvdProjection svd;
    Eigen::Index rank_bound = 0;
  };

  std::vector<std::string> names_;
  std::vector<Modality> modalities_;
  std::vector<std::string> row_ids_;
  LabeledDataset labels_;
  NormWeights weights_;
};

/// Normalize each modality, project it to l_m, scale by alpha_m, concatenate
/// in input order, normalize rows again. Modalities with alpha 0 add no
/// columns. l_m above min(N, d_m) is clamped with a warning.
FusedDataset fuse(std::span<const EmbeddingMatrix> matrices, const LabeledDataset& labels,
                  const FusionConfig& config, const NormWeights& weights = {});

/// Concatenate-then-project baseline: normalize each modality, concatenate
/// everything unweighted, one SVD to `p`, normalize rows.
FusedDataset fuse_concat_project(std::span<const EmbeddingMatrix> matrices,
                                 const LabeledDataset& labels, int p,
                                 const NormWeights& weights = {});

inline constexpr int kConcatProjectDefaultDim = 32;

/// Throws kUnalignedInputs unless every matrix and the labels share the same
/// row ids in the same order.
void check_aligned(std::span<const EmbeddingMatrix> matrices, const LabeledDataset& labels);

}  // namespace fudoba
