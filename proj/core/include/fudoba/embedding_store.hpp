// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fudoba {

/// One modality's per-document vectors. Rows follow `row_ids`.
struct EmbeddingMatrix {
  std::string modality_name;
  std::vector<std::string> row_ids;
  Eigen::MatrixXd data;

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }
};

/// Checks the EmbeddingMatrix invariants: non-empty, unique ids, row count
/// equal to the id count, finite values. Throws fudoba::Error.
void validate(const EmbeddingMatrix& matrix);

struct LabeledDataset {
  std::vector<std::string> row_ids;
  std::vector<std::string> labels;
  /// Distinct labels in ascending order.
  std::vector<std::string> class_set;

  std::size_t size() const { return row_ids.size(); }
  std::size_t num_classes() const { return class_set.size(); }
  /// Label of every row as an index into class_set.
  std::vector<int> class_indices() const;
};

/// Builds a dataset from parallel id/label lists; class_set is derived.
LabeledDataset make_labeled_dataset(std::vector<std::string> row_ids,
                                    std::vector<std::string> labels);

enum class MatrixFormat { kBinary, kCsv };

/// Picks kCsv for `.csv` files and kBinary for everything else.
MatrixFormat format_from_extension(const std::filesystem::path& path);

EmbeddingMatrix load_embedding_matrix(const std::filesystem::path& path,
                                      MatrixFormat format,
                                      std::string modality_name = {});
void save_embedding_matrix(const EmbeddingMatrix& matrix,
                           const std::filesystem::path& path,
                           MatrixFormat format);

/// Encodes to the FDB1 byte layout (little-endian f32 payload).
std::string encode_fdb1(const EmbeddingMatrix& matrix);
EmbeddingMatrix decode_fdb1(std::string_view bytes, std::string modality_name = {});

/// Reads a two-column `id,label` CSV with a header line.
LabeledDataset load_labels(const std::filesystem::path& path);
void save_labels(const LabeledDataset& labels, const std::filesystem::path& path);

/// Restricts every matrix and the labels to the shared ids, ordered by id.
struct AlignedData {
  std::vector<EmbeddingMatrix> matrices;
  LabeledDataset labels;
};
AlignedData align_modalities(std::span<const EmbeddingMatrix> matrices,
                             const LabeledDataset& labels);

struct EntityMap {
  std::map<std::string, std::vector<std::string>> doc_to_entities;
  /// Row ids are entity ids.
  EmbeddingMatrix entity_vectors;
};

/// Reads the JSON document→entities mapping plus the FDB1 entity-vector file.
EntityMap load_entity_map(const std::filesystem::path& json_path,
                          const std::filesystem::path& vectors_path);

struct EntityAggregation {
  EmbeddingMatrix matrix;
  /// Linked entity ids that had no vector, per output row.
  std::vector<std::size_t> missing_entities;
  /// Rows that ended up as the zero vector.
  std::size_t documents_without_entities = 0;
};

/// Mean of each document's resolvable entity vectors; zero vector when none
/// resolve.
EntityAggregation aggregate_entities(const EntityMap& map,
                                     std::span<const std::string> doc_ids,
                                     std::string modality_name = "kg");

}  // namespace fudoba
