// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include "fudoba/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "fudoba/error.hpp"
#include "fudoba/io_util.hpp"

namespace fudoba {
namespace {

constexpr char kMagic[4] = {'F', 'D', 'B', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kParse, "truncated FDB1 data");
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

double parse_double(std::string_view field, std::size_t line_no) {
  std::string_view s = trim(field);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    // from_chars rejects a leading '+', which some writers emit.
    if (!s.empty() && s.front() == '+') return parse_double(s.substr(1), line_no);
    throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": bad number '" +
                                       std::string(s) + "'");
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kNonFiniteValue,
                "line " + std::to_string(line_no) + ": value '" + std::string(s) + "'");
  }
  return value;
}

EmbeddingMatrix parse_csv_matrix(const std::string& text, std::string modality_name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t cols = 0;
  bool have_header = false;
  std::vector<std::string> ids;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      if (fields.size() < 2) {
        throw Error(ErrorCode::kParse, "CSV header needs an id column and at least one value");
      }
      cols = fields.size() - 1;
      have_header = true;
      continue;
    }
    if (fields.size() != cols + 1) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "line " + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                      " values, found " + std::to_string(fields.size() - 1));
    }
    ids.emplace_back(trim(fields[0]));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      values.push_back(parse_double(fields[c], line_no));
    }
  }
  if (ids.empty()) throw Error(ErrorCode::kEmptyFile, "no data rows");

  EmbeddingMatrix m;
  m.modality_name = std::move(modality_name);
  m.row_ids = std::move(ids);
  m.data.resize(static_cast<Eigen::Index>(m.row_ids.size()), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.data.cols(); ++c) {
      m.data(r, c) = values[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)];
    }
  }
  return m;
}

std::string format_csv_value(double v) {
  // Shortest representation that round-trips.
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void validate(const EmbeddingMatrix& matrix) {
  if (matrix.data.rows() < 1 || matrix.data.cols() < 1) {
    throw Error(ErrorCode::kEmptyFile, "matrix '" + matrix.modality_name + "' is empty");
  }
  if (static_cast<std::size_t>(matrix.data.rows()) != matrix.row_ids.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "matrix '" + matrix.modality_name + "' has " +
                    std::to_string(matrix.data.rows()) + " rows but " +
                    std::to_string(matrix.row_ids.size()) + " ids");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : matrix.row_ids) {
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::kDuplicateRowId, "row id '" + id + "' repeats");
    }
  }
  if (!matrix.data.allFinite()) {
    throw Error(ErrorCode::kNonFiniteValue, "matrix '" + matrix.modality_name + "'");
  }
}

std::vector<int> LabeledDataset::class_indices() const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& label : labels) {
    auto it = std::lower_bound(class_set.begin(), class_set.end(), label);
    if (it == class_set.end() || *it != label) {
      throw Error(ErrorCode::kInvalidArgument, "label '" + label + "' not in class set");
    }
    out.push_back(static_cast<int>(it - class_set.begin()));
  }
  return out;
}

LabeledDataset make_labeled_dataset(std::vector<std::string> row_ids,
                                    std::vector<std::string> labels) {
  if (row_ids.size() != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "ids and labels differ in length");
  }
  LabeledDataset out;
  std::set<std::string> classes(labels.begin(), labels.end());
  out.class_set.assign(classes.begin(), classes.end());
  out.row_ids = std::move(row_ids);
  out.labels = std::move(labels);
  return out;
}

MatrixFormat format_from_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".csv") return MatrixFormat::kCsv;
  if (ext == ".fdb" || ext == ".bin") return MatrixFormat::kBinary;
  throw Error(ErrorCode::kInvalidArgument, "unrecognised matrix extension '" + ext + "' (expected .fdb or .csv)");
}

std::string encode_fdb1(const EmbeddingMatrix& matrix) {
  std::string out;
  const auto rows = static_cast<std::uint32_t>(matrix.data.rows());
  const auto cols = static_cast<std::uint32_t>(matrix.data.cols());
  out.reserve(16 + matrix.row_ids.size() * 12 + static_cast<std::size_t>(rows) * cols * 4);
  out.append(kMagic, 4);
  put_u32(out, rows);
  put_u32(out, cols);
  put_u32(out, static_cast<std::uint32_t>(matrix.row_ids.size()));
  for (const auto& id : matrix.row_ids) {
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out += id;
  }
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const auto f = static_cast<float>(matrix.data(r, c));
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

EmbeddingMatrix decode_fdb1(std::string_view bytes, std::string modality_name) {
  if (bytes.empty()) throw Error(ErrorCode::kEmptyFile, "empty FDB1 file");
  ByteReader reader(bytes);
  auto magic = reader.take(4);
  if (magic != std::string_view(kMagic, 4)) {
    throw Error(ErrorCode::kParse, "missing FDB1 magic");
  }
  const std::uint32_t rows = reader.u32();
  const std::uint32_t cols = reader.u32();
  const std::uint32_t count = reader.u32();
  if (count != rows) {
    throw Error(ErrorCode::kDimensionMismatch, "row-id count " + std::to_string(count) +
                                                   " differs from row count " +
                                                   std::to_string(rows));
  }
  EmbeddingMatrix m;
  m.modality_name = std::move(modality_name);
  m.row_ids.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = reader.u32();
    m.row_ids.emplace_back(reader.take(len));
  }
  const std::size_t payload = static_cast<std::size_t>(rows) * cols * 4;
  if (reader.remaining() != payload) {
    throw Error(ErrorCode::kDimensionMismatch,
                "payload has " + std::to_string(reader.remaining()) + " bytes, expected " +
                    std::to_string(payload));
  }
  m.data.resize(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      m.data(r, c) = static_cast<double>(std::bit_cast<float>(reader.u32()));
    }
  }
  validate(m);
  return m;
}

EmbeddingMatrix load_embedding_matrix(const std::filesystem::path& path, MatrixFormat format,
                                      std::string modality_name) {
  const std::string bytes = read_file(path);
  if (bytes.empty()) throw Error(ErrorCode::kEmptyFile, path.string());
  EmbeddingMatrix m = format == MatrixFormat::kBinary
                          ? decode_fdb1(bytes, std::move(modality_name))
                          : parse_csv_matrix(bytes, std::move(modality_name));
  validate(m);
  return m;
}

void save_embedding_matrix(const EmbeddingMatrix& matrix, const std::filesystem::path& path,
                           MatrixFormat format) {
  validate(matrix);
  if (format == MatrixFormat::kBinary) {
    write_file_atomic(path, encode_fdb1(matrix));
    return;
  }
  std::string out = "id";
  for (Eigen::Index c = 0; c < matrix.dim(); ++c) out += ",c" + std::to_string(c);
  out += '\n';
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    out += matrix.row_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < matrix.dim(); ++c) {
      out += ',';
      out += format_csv_value(matrix.data(r, c));
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

LabeledDataset load_labels(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> ids;
  std::vector<std::string> labels;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() != 2) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) +
                                         ": expected 'id,label'");
    }
    ids.emplace_back(trim(fields[0]));
    labels.emplace_back(trim(fields[1]));
  }
  if (ids.empty()) throw Error(ErrorCode::kEmptyFile, path.string());
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::kDuplicateRowId, "label id '" + id + "' repeats");
    }
  }
  auto out = make_labeled_dataset(std::move(ids), std::move(labels));
  if (out.num_classes() < 2) {
    throw Error(ErrorCode::kSingleClass, path.string() + " has fewer than two classes");
  }
  return out;
}

void save_labels(const LabeledDataset& labels, const std::filesystem::path& path) {
  std::string out = "id,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += labels.row_ids[i] + "," + labels.labels[i] + "\n";
  }
  write_file_atomic(path, out);
}

AlignedData align_modalities(std::span<const EmbeddingMatrix> matrices,
                             const LabeledDataset& labels) {
  if (matrices.empty()) throw Error(ErrorCode::kInvalidArgument, "no modality matrices");
  if (labels.size() == 0) throw Error(ErrorCode::kInvalidArgument, "labels are empty");

  auto index_of = [](const std::vector<std::string>& ids) {
    std::unordered_map<std::string, std::size_t> idx;
    idx.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!idx.emplace(ids[i], i).second) {
        throw Error(ErrorCode::kDuplicateRowId, "row id '" + ids[i] + "' repeats");
      }
    }
    return idx;
  };

  auto label_index = index_of(labels.row_ids);
  std::vector<std::unordered_map<std::string, std::size_t>> matrix_index;
  matrix_index.reserve(matrices.size());
  for (const auto& m : matrices) matrix_index.push_back(index_of(m.row_ids));

  std::vector<std::string> shared;
  for (const auto& id : labels.row_ids) {
    bool everywhere = std::all_of(matrix_index.begin(), matrix_index.end(),
                                  [&](const auto& idx) { return idx.contains(id); });
    if (everywhere) shared.push_back(id);
  }
  if (shared.empty()) throw Error(ErrorCode::kEmptyIntersection, "modalities share no row ids");
  std::sort(shared.begin(), shared.end());

  AlignedData out;
  out.matrices.reserve(matrices.size());
  for (std::size_t m = 0; m < matrices.size(); ++m) {
    EmbeddingMatrix aligned;
    aligned.modality_name = matrices[m].modality_name;
    aligned.row_ids = shared;
    aligned.data.resize(static_cast<Eigen::Index>(shared.size()), matrices[m].dim());
    for (std::size_t r = 0; r < shared.size(); ++r) {
      aligned.data.row(static_cast<Eigen::Index>(r)) =
          matrices[m].data.row(static_cast<Eigen::Index>(matrix_index[m].at(shared[r])));
    }
    out.matrices.push_back(std::move(aligned));
  }
  std::vector<std::string> aligned_labels;
  aligned_labels.reserve(shared.size());
  for (const auto& id : shared) aligned_labels.push_back(labels.labels[label_index.at(id)]);
  out.labels = make_labeled_dataset(shared, std::move(aligned_labels));
  return out;
}

EntityMap load_entity_map(const std::filesystem::path& json_path,
                          const std::filesystem::path& vectors_path) {
  EntityMap map;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(json_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, json_path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("doc_to_entities") ||
      !doc["doc_to_entities"].is_object()) {
    throw Error(ErrorCode::kParse, json_path.string() + ": missing 'doc_to_entities' object");
  }
  for (const auto& [doc_id, entities] : doc["doc_to_entities"].items()) {
    if (!entities.is_array()) {
      throw Error(ErrorCode::kParse, "entities of '" + doc_id + "' must be an array");
    }
    auto& list = map.doc_to_entities[doc_id];
    for (const auto& e : entities) list.push_back(e.get<std::string>());
  }
  map.entity_vectors = load_embedding_matrix(vectors_path, MatrixFormat::kBinary, "entities");
  return map;
}

EntityAggregation aggregate_entities(const EntityMap& map, std::span<const std::string> doc_ids,
                                     std::string modality_name) {
  if (doc_ids.empty()) throw Error(ErrorCode::kInvalidArgument, "no document ids");
  const Eigen::Index dim = map.entity_vectors.dim();
  std::unordered_map<std::string, Eigen::Index> entity_row;
  for (std::size_t i = 0; i < map.entity_vectors.row_ids.size(); ++i) {
    entity_row.emplace(map.entity_vectors.row_ids[i], static_cast<Eigen::Index>(i));
  }

  EntityAggregation out;
  out.matrix.modality_name = std::move(modality_name);
  out.matrix.row_ids.assign(doc_ids.begin(), doc_ids.end());
  out.matrix.data = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(doc_ids.size()), dim);
  out.missing_entities.assign(doc_ids.size(), 0);

  std::size_t total_missing = 0;
  for (std::size_t d = 0; d < doc_ids.size(); ++d) {
    auto it = map.doc_to_entities.find(doc_ids[d]);
    // Sorting first makes the floating-point sum independent of list order.
    std::vector<Eigen::Index> rows;
    if (it != map.doc_to_entities.end()) {
      for (const auto& entity : it->second) {
        auto found = entity_row.find(entity);
        if (found == entity_row.end()) {
          ++out.missing_entities[d];
        } else {
          rows.push_back(found->second);
        }
      }
    }
    total_missing += out.missing_entities[d];
    if (rows.empty()) {
      ++out.documents_without_entities;
      continue;
    }
    std::sort(rows.begin(), rows.end());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    for (auto r : rows) sum += map.entity_vectors.data.row(r).transpose();
    out.matrix.data.row(static_cast<Eigen::Index>(d)) =
        (sum / static_cast<double>(rows.size())).transpose();
  }
  if (total_missing > 0) {
    spdlog::warn("dropped {} entity references without vectors", total_missing);
  }
  return out;
}

}  // namespace fudoba
