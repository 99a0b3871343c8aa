// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Core>

namespace fudoba {

/// Weights of the L1 and L2 terms in the elastic-net denominator.
struct NormWeights {
  double w1 = 0.5;
  double w2 = 0.5;

  void validate() const;
};

/// x / (w1·|x|_1 + w2·|x|_2). The zero vector maps to itself.
Eigen::VectorXd elastic_net_normalize(const Eigen::VectorXd& x, const NormWeights& w = {});

/// Row-wise elastic_net_normalize, in place.
void normalize_rows(Eigen::MatrixXd& m, const NormWeights& w = {});
Eigen::MatrixXd normalized_rows(Eigen::MatrixXd m, const NormWeights& w = {});

/// Top-p right singular vectors and values of a matrix.
///
/// Sign convention: each component column's entry of largest magnitude is
/// positive (first such entry on exact ties). Columns are orthonormal and
/// singular values non-increasing.
struct SvdProjection {
  Eigen::MatrixXd components;       ///< d × p
  Eigen::VectorXd singular_values;  ///< p, non-increasing

  Eigen::Index rank() const { return components.cols(); }
  Eigen::Index input_dim() const { return components.rows(); }

  /// First `p` components of this projection.
  SvdProjection truncated(Eigen::Index p) const;
};

inline constexpr const char* kSvdSignConvention = "max-abs-entry-positive";

/// Full thin SVD of `a`, truncated to `p` (1 ≤ p ≤ min(N, d)).
SvdProjection fit_truncated_svd(const Eigen::MatrixXd& a, Eigen::Index p);

/// a · components.
Eigen::MatrixXd project(const Eigen::MatrixXd& a, const SvdProjection& svd);

/// Writes `<stem>.fdb` (components, FDB1) and `<stem>.json` (singular values,
/// rank, sign convention).
void save_projection(const SvdProjection& svd, const std::filesystem::path& stem);
SvdProjection load_projection(const std::filesystem::path& stem);

}  // namespace fudoba
