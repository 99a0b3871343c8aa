// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors
//
// Reference implementations used to check the library. They favour
// transparency and extended precision over speed.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace fudoba::testing {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

struct EigenPairs {
  std::vector<long double> values;  // descending
  LMatrix vectors;                  // columns match values
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
inline EigenPairs jacobi_eigen(LMatrix a) {
  const Eigen::Index n = a.rows();
  LMatrix v = LMatrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    long double off = 0.0L;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-40L) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::fabs(a(p, q)) < 1e-300L) continue;
        const long double theta = (a(q, q) - a(p, p)) / (2.0L * a(p, q));
        const long double t = (theta >= 0 ? 1.0L : -1.0L) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0L));
        const long double c = 1.0L / std::sqrt(t * t + 1.0L);
        const long double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const long double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const long double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const long double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) > a(j, j); });
  EigenPairs out;
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values.push_back(a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]));
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

/// Top-p right singular structure of `a` from the eigendecomposition of AᵀA.
struct SvdOracle {
  std::vector<long double> singular_values;
  LMatrix components;  // d × p
};

inline SvdOracle svd_via_gram(const Eigen::MatrixXd& a, Eigen::Index p) {
  const LMatrix al = a.cast<long double>();
  const auto pairs = jacobi_eigen(al.transpose() * al);
  SvdOracle out;
  for (Eigen::Index i = 0; i < p; ++i) {
    out.singular_values.push_back(std::sqrt(std::max(0.0L, pairs.values[static_cast<std::size_t>(i)])));
  }
  out.components = pairs.vectors.leftCols(p);
  return out;
}

/// Solves a dense system by Gaussian elimination with partial pivoting.
inline LVector solve_dense(LMatrix a, LVector b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index pivot = c;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      if (std::fabs(a(r, c)) > std::fabs(a(pivot, c))) pivot = r;
    }
    a.row(c).swap(a.row(pivot));
    std::swap(b[c], b[pivot]);
    for (Eigen::Index r = c + 1; r < n; ++r) {
      const long double f = a(r, c) / a(c, c);
      a.row(r) -= f * a.row(c);
      b[r] -= f * b[c];
    }
  }
  LVector x(n);
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    long double s = b[r];
    for (Eigen::Index c = r + 1; c < n; ++c) s -= a(r, c) * x[c];
    x[r] = s / a(r, r);
  }
  return x;
}

inline long double matern52(long double r, long double ell, long double variance) {
  const long double s = std::sqrt(5.0L) * r / ell;
  return variance * (1.0L + s + s * s / 3.0L) * std::exp(-s);
}

struct GpOracle {
  long double mean;
  long double sigma;
};

/// Posterior of a zero-mean GP on centred targets, by direct solves.
inline GpOracle gp_posterior(const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& ys,
                             const Eigen::VectorXd& query, long double ell, long double variance,
                             long double diag) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  long double mean_y = 0.0L;
  for (double y : ys) mean_y += y;
  mean_y /= static_cast<long double>(n);
  LMatrix k(n, n);
  LVector ks(n), yc(n);
  auto dist = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    long double s = 0.0L;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const long double d = static_cast<long double>(a[i]) - b[i];
      s += d * d;
    }
    return std::sqrt(s);
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k(i, j) = i == j ? variance + diag : matern52(dist(xs[i], xs[j]), ell, variance);
    }
    ks[i] = matern52(dist(query, xs[i]), ell, variance);
    yc[i] = ys[static_cast<std::size_t>(i)] - mean_y;
  }
  const LVector w = solve_dense(k, ks);
  const LVector alpha = solve_dense(k, yc);
  const long double var = variance - ks.dot(w);
  return {mean_y + ks.dot(alpha), var > 0 ? std::sqrt(var) : 0.0L};
}

/// Macro-F1/precision/recall from an explicit confusion matrix.
struct MacroOracle {
  double f1, precision, recall;
};

inline MacroOracle macro_from_confusion(const std::vector<int>& y, const std::vector<int>& yhat, int classes) {
  std::vector<std::vector<long long>> cm(static_cast<std::size_t>(classes),
                                         std::vector<long long>(static_cast<std::size_t>(classes), 0));
  for (std::size_t i = 0; i < y.size(); ++i) ++cm[static_cast<std::size_t>(y[i])][static_cast<std::size_t>(yhat[i])];
  long double f1 = 0, pr = 0, rc = 0;
  for (int c = 0; c < classes; ++c) {
    long long tp = cm[c][c], col = 0, row = 0;
    for (int o = 0; o < classes; ++o) {
      col += cm[o][c];
      row += cm[c][o];
    }
    const long double p = col ? static_cast<long double>(tp) / col : 0.0L;
    const long double r = row ? static_cast<long double>(tp) / row : 0.0L;
    pr += p;
    rc += r;
    f1 += (p + r) > 0 ? 2 * p * r / (p + r) : 0.0L;
  }
  return {static_cast<double>(f1 / classes), static_cast<double>(pr / classes),
          static_cast<double>(rc / classes)};
}

/// Rank of each entry within its row (1 = highest), ties share the mean rank.
inline std::vector<std::vector<long double>> brute_force_ranks(const Eigen::MatrixXd& scores) {
  std::vector<std::vector<long double>> out;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    std::vector<long double> row;
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      long double better = 0, equal = 0;
      for (Eigen::Index o = 0; o < scores.cols(); ++o) {
        if (scores(r, o) > scores(r, c)) ++better;
        if (scores(r, o) == scores(r, c)) ++equal;
      }
      row.push_back(better + (equal + 1) / 2);
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace fudoba::testing
