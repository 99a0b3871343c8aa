// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include <cmath>
#include <filesystem>
#include <limits>

#include <gtest/gtest.h>

#include "fudoba/error.hpp"
#include "fudoba/numerics.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace fudoba {
namespace {

using testing::gaussian_matrix;

double weighted_norm(const Eigen::VectorXd& x, const NormWeights& w) {
  return w.w1 * x.lpNorm<1>() + w.w2 * x.norm();
}

TEST(ElasticNetNormalize, HandComputedPair) {
  Eigen::VectorXd x(2);
  x << 3.0, 4.0;
  const auto n = elastic_net_normalize(x);
  // ‖x‖₁ = 7, ‖x‖₂ = 5, denominator 6.
  EXPECT_DOUBLE_EQ(n[0], 0.5);
  EXPECT_NEAR(n[1], 4.0 / 6.0, 1e-15);
}

TEST(ElasticNetNormalize, ZeroVectorStaysZero) {
  const auto n = elastic_net_normalize(Eigen::VectorXd::Zero(2));
  EXPECT_EQ(n, Eigen::VectorXd::Zero(2));
}

TEST(ElasticNetNormalize, OneDimensional) {
  for (double c : {1e-3, 1.0, 17.5}) {
    Eigen::VectorXd x(1);
    x << c;
    EXPECT_NEAR(elastic_net_normalize(x)[0], 1.0, 1e-15);
  }
}

TEST(ElasticNetNormalize, RejectsNonFinite) {
  Eigen::VectorXd x(2);
  x << 1.0, std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(elastic_net_normalize(x), Error);
}

TEST(ElasticNetNormalize, RejectsBadWeights) {
  EXPECT_THROW(elastic_net_normalize(Eigen::VectorXd::Ones(3), NormWeights{-1.0, 0.5}), Error);
  EXPECT_THROW(elastic_net_normalize(Eigen::VectorXd::Ones(3), NormWeights{0.0, 0.0}), Error);
}

TEST(ElasticNetNormalize, IdempotentAndDirectionPreserving) {
  Rng rng(11);
  for (const NormWeights w : {NormWeights{0.5, 0.5}, NormWeights{1.0, 0.0}, NormWeights{0.0, 1.0},
                              NormWeights{0.2, 0.9}}) {
    for (int t = 0; t < 200; ++t) {
      Eigen::VectorXd x = gaussian_matrix(1 + static_cast<Eigen::Index>(uniform_below(rng, 30)), 1, rng).col(0);
      x *= std::pow(10.0, 6.0 * uniform01(rng) - 3.0);
      const auto n = elastic_net_normalize(x, w);
      EXPECT_NEAR(weighted_norm(n, w), 1.0, 1e-10);
      EXPECT_LT((elastic_net_normalize(n, w) - n).cwiseAbs().maxCoeff(), 1e-10);
      const double scale = x.dot(n) / x.squaredNorm();
      EXPECT_GT(scale, 0.0);
      EXPECT_LT((scale * x - n).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(NormalizeRows, MatchesVectorForm) {
  Rng rng(3);
  Eigen::MatrixXd m = gaussian_matrix(7, 4, rng);
  m.row(2).setZero();
  const auto out = normalized_rows(m);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    EXPECT_EQ(out.row(r).transpose(), elastic_net_normalize(m.row(r).transpose()));
  }
}

TEST(TruncatedSvd, DiagonalMatrix) {
  Eigen::MatrixXd a = Eigen::Vector2d(2.0, 1.0).asDiagonal();
  const auto svd = fit_truncated_svd(a, 1);
  ASSERT_EQ(svd.singular_values.size(), 1);
  EXPECT_NEAR(svd.singular_values[0], 2.0, 1e-12);
  EXPECT_NEAR(svd.components(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(svd.components(1, 0), 0.0, 1e-12);
  const auto p = project(a, svd);
  EXPECT_NEAR(p(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(p(1, 0), 0.0, 1e-12);
}

TEST(TruncatedSvd, IdentityReconstructsExactly) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  const auto svd = fit_truncated_svd(a, 3);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(svd.singular_values[i], 1.0, 1e-12);
  const Eigen::MatrixXd recon = project(a, svd) * svd.components.transpose();
  EXPECT_LT((recon - a).norm(), 1e-12);
}

TEST(TruncatedSvd, IdentityTwoHasOrthonormalRows) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
  const auto p = project(a, fit_truncated_svd(a, 2));
  EXPECT_LT((p * p.transpose() - Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-12);
}

TEST(TruncatedSvd, LowRankReconstructionAgainstOracle) {
  Rng rng(5);
  const Eigen::MatrixXd a = gaussian_matrix(10, 3, rng) * gaussian_matrix(3, 6, rng);
  const auto svd = fit_truncated_svd(a, 3);
  const Eigen::MatrixXd recon = project(a, svd) * svd.components.transpose();
  EXPECT_LE((recon - a).norm(), 1e-8);

  const auto oracle = testing::svd_via_gram(a, 3);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(svd.singular_values[i], static_cast<double>(oracle.singular_values[i]), 1e-6);
  }
  const Eigen::MatrixXd proj = project(a, svd);
  EXPECT_LT((proj * proj.transpose() - a * a.transpose()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(TruncatedSvd, ComponentsOrthonormalAndSorted) {
  Rng rng(8);
  const Eigen::MatrixXd a = gaussian_matrix(30, 12, rng);
  const auto svd = fit_truncated_svd(a, 8);
  EXPECT_LT((svd.components.transpose() * svd.components - Eigen::MatrixXd::Identity(8, 8)).norm(), 1e-8);
  for (Eigen::Index i = 1; i < 8; ++i) EXPECT_GE(svd.singular_values[i - 1], svd.singular_values[i]);
  const double energy = project(a, svd).squaredNorm();
  EXPECT_NEAR(energy, svd.singular_values.squaredNorm(), 1e-6);
}

TEST(TruncatedSvd, SignConventionIsDeterministic) {
  Rng rng(9);
  const Eigen::MatrixXd a = gaussian_matrix(20, 6, rng);
  const auto s1 = fit_truncated_svd(a, 4);
  const auto s2 = fit_truncated_svd(-a, 4);
  EXPECT_EQ(s1.components, s2.components);
  for (Eigen::Index c = 0; c < 4; ++c) {
    Eigen::Index idx = 0;
    s1.components.col(c).cwiseAbs().maxCoeff(&idx);
    EXPECT_GT(s1.components(idx, c), 0.0);
  }
}

TEST(TruncatedSvd, PrefixOfLargerFit) {
  Rng rng(10);
  const Eigen::MatrixXd a = gaussian_matrix(25, 9, rng);
  const auto full = fit_truncated_svd(a, 9);
  const auto five = fit_truncated_svd(a, 5);
  EXPECT_EQ(full.truncated(5).components, five.components);
}

TEST(TruncatedSvd, RejectsBadRank) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Ones(4, 3);
  EXPECT_THROW(fit_truncated_svd(a, 0), Error);
  EXPECT_THROW(fit_truncated_svd(a, 4), Error);
}

TEST(Project, DimensionMismatch) {
  const auto svd = fit_truncated_svd(Eigen::MatrixXd::Identity(3, 3), 2);
  EXPECT_THROW(project(Eigen::MatrixXd::Ones(2, 4), svd), Error);
}

TEST(Projection, SaveLoadRoundTrip) {
  Rng rng(12);
  const auto svd = fit_truncated_svd(gaussian_matrix(12, 5, rng), 3);
  const auto stem = std::filesystem::temp_directory_path() / "fudoba_projection_rt";
  save_projection(svd, stem);
  const auto back = load_projection(stem);
  EXPECT_EQ(back.rank(), 3);
  EXPECT_LT((back.components - svd.components).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((back.singular_values - svd.singular_values).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace fudoba
