// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include "fudoba/numerics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "fudoba/embedding_store.hpp"
#include "fudoba/error.hpp"
#include "fudoba/io_util.hpp"

namespace fudoba {
namespace {

double elastic_denominator(const auto& x, const NormWeights& w) {
  double l1 = 0.0;
  double sq = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    l1 += std::abs(x[i]);
    sq += x[i] * x[i];
  }
  return w.w1 * l1 + w.w2 * std::sqrt(sq);
}

void fix_signs(Eigen::MatrixXd& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      const double a = std::abs(v(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (v(best, c) < 0.0) v.col(c) = -v.col(c);
  }
}

std::string matrix_stem_path(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p.string();
}

}  // namespace

void NormWeights::validate() const {
  if (!(w1 >= 0.0) || !(w2 >= 0.0) || !(w1 + w2 > 0.0) || !std::isfinite(w1 + w2)) {
    throw Error(ErrorCode::kInvalidArgument, "norm weights need w1, w2 >= 0 and w1 + w2 > 0");
  }
}

Eigen::VectorXd elastic_net_normalize(const Eigen::VectorXd& x, const NormWeights& w) {
  w.validate();
  if (!x.allFinite()) throw Error(ErrorCode::kNonFiniteValue, "normalize input");
  const double denom = elastic_denominator(x, w);
  if (denom == 0.0) return Eigen::VectorXd::Zero(x.size());
  return x / denom;
}

void normalize_rows(Eigen::MatrixXd& m, const NormWeights& w) {
  w.validate();
  if (!m.allFinite()) throw Error(ErrorCode::kNonFiniteValue, "normalize input");
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double denom = elastic_denominator(row, w);
    if (denom == 0.0) {
      row.setZero();
    } else {
      row /= denom;
    }
  }
}

Eigen::MatrixXd normalized_rows(Eigen::MatrixXd m, const NormWeights& w) {
  normalize_rows(m, w);
  return m;
}

SvdProjection SvdProjection::truncated(Eigen::Index p) const {
  if (p < 1 || p > rank()) {
    throw Error(ErrorCode::kRankOutOfRange,
                "cannot truncate rank " + std::to_string(rank()) + " to " + std::to_string(p));
  }
  return SvdProjection{components.leftCols(p), singular_values.head(p)};
}

SvdProjection fit_truncated_svd(const Eigen::MatrixXd& a, Eigen::Index p) {
  const Eigen::Index max_rank = std::min(a.rows(), a.cols());
  if (p < 1 || p > max_rank) {
    throw Error(ErrorCode::kRankOutOfRange, "p=" + std::to_string(p) + " outside [1, " +
                                                std::to_string(max_rank) + "]");
  }
  if (!a.allFinite()) throw Error(ErrorCode::kNonFiniteValue, "svd input");

  // Always decompose fully and slice, so the leading columns do not depend on p.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
  Eigen::MatrixXd v = svd.matrixV().leftCols(p);
  fix_signs(v);
  return SvdProjection{std::move(v), svd.singularValues().head(p)};
}

Eigen::MatrixXd project(const Eigen::MatrixXd& a, const SvdProjection& svd) {
  if (a.cols() != svd.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "matrix has " + std::to_string(a.cols()) + " columns, projection expects " +
                    std::to_string(svd.input_dim()));
  }
  return a * svd.components;
}

void save_projection(const SvdProjection& svd, const std::filesystem::path& stem) {
  EmbeddingMatrix m;
  m.modality_name = "components";
  m.data = svd.components;
  m.row_ids.reserve(static_cast<std::size_t>(svd.input_dim()));
  for (Eigen::Index r = 0; r < svd.input_dim(); ++r) m.row_ids.push_back(std::to_string(r));
  save_embedding_matrix(m, matrix_stem_path(stem, ".fdb"), MatrixFormat::kBinary);

  nlohmann::ordered_json sidecar;
  sidecar["p"] = svd.rank();
  sidecar["singular_values"] =
      std::vector<double>(svd.singular_values.data(),
                          svd.singular_values.data() + svd.singular_values.size());
  sidecar["sign_convention"] = kSvdSignConvention;
  write_file_atomic(matrix_stem_path(stem, ".json"), sidecar.dump(2) + "\n");
}

SvdProjection load_projection(const std::filesystem::path& stem) {
  auto m = load_embedding_matrix(matrix_stem_path(stem, ".fdb"), MatrixFormat::kBinary);
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(read_file(matrix_stem_path(stem, ".json")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  auto values = sidecar.at("singular_values").get<std::vector<double>>();
  const auto p = sidecar.at("p").get<Eigen::Index>();
  if (p != m.dim() || static_cast<Eigen::Index>(values.size()) != p) {
    throw Error(ErrorCode::kDimensionMismatch, "projection sidecar disagrees with components");
  }
  SvdProjection out;
  out.components = std::move(m.data);
  out.singular_values = Eigen::Map<const Eigen::VectorXd>(values.data(), p);
  return out;
}

}  // namespace fudoba
