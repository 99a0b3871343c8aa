// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include "fudoba/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "fudoba/error.hpp"
#include "fudoba/io_util.hpp"
#include "fudoba/random.hpp"

namespace fudoba {
namespace {

// Demšar (2006), table 5: two-tailed Nemenyi critical values.
constexpr double kNemenyiQ05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
constexpr double kNemenyiQ10[] = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};

std::vector<double> average_ranks(const std::vector<double>& values, bool descending) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string format_alpha(double a) {
  std::string s = format_fixed(a, 2);
  if (s.size() > 3 && s.back() == '0') s.pop_back();
  return s;
}

// --- bagged regression trees ------------------------------------------------

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  const std::vector<double>& y;
  int max_depth;
  std::vector<double>& importance;

  static double sse(const std::vector<double>& y, std::span<const std::size_t> rows) {
    if (rows.empty()) return 0.0;
    double mean = 0.0;
    for (auto r : rows) mean += y[r];
    mean /= static_cast<double>(rows.size());
    double s = 0.0;
    for (auto r : rows) s += (y[r] - mean) * (y[r] - mean);
    return s;
  }

  void grow(std::vector<std::size_t> rows, int depth) {
    if (depth >= max_depth || rows.size() < 2) return;
    const double parent = sse(y, rows);
    if (parent <= 0.0) return;

    double best_gain = 0.0;
    Eigen::Index best_feature = -1;
    double best_threshold = 0.0;
    // Features whose best split ties the winner share its importance.
    std::vector<Eigen::Index> tied;
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      std::vector<std::size_t> sorted = rows;
      std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return x(a, f) != x(b, f) ? x(a, f) < x(b, f) : a < b;
      });
      // Prefix sums give each split's SSE in O(1).
      double left_sum = 0.0, left_sq = 0.0;
      double total_sum = 0.0, total_sq = 0.0;
      for (auto r : sorted) {
        total_sum += y[r];
        total_sq += y[r] * y[r];
      }
      const auto n = static_cast<double>(sorted.size());
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left_sum += y[sorted[i]];
        left_sq += y[sorted[i]] * y[sorted[i]];
        const double xa = x(sorted[i], f);
        const double xb = x(sorted[i + 1], f);
        if (xa == xb) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double right_sum = total_sum - left_sum;
        const double right_sq = total_sq - left_sq;
        const double child = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
        const double gain = parent - child;
        if (gain > best_gain * (1.0 + 1e-12) + 1e-15) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (xa + xb);
          tied.assign(1, f);
        } else if (gain >= best_gain * (1.0 - 1e-12) - 1e-15 && best_feature >= 0 && tied.back() != f) {
          tied.push_back(f);
        }
      }
    }
    if (best_feature < 0) return;
    for (auto f : tied) importance[static_cast<std::size_t>(f)] += best_gain / static_cast<double>(tied.size());
    std::vector<std::size_t> left, right;
    for (auto r : rows) (x(r, best_feature) <= best_threshold ? left : right).push_back(r);
    grow(std::move(left), depth + 1);
    grow(std::move(right), depth + 1);
  }
};

}  // namespace

void ScoreTable::validate() const {
  if (methods.size() < 2 || datasets.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "need at least 2 methods and 2 datasets");
  }
  if (scores.rows() != static_cast<Eigen::Index>(datasets.size()) ||
      scores.cols() != static_cast<Eigen::Index>(methods.size())) {
    throw Error(ErrorCode::kDimensionMismatch, "score matrix shape differs from labels");
  }
  if (!scores.allFinite()) throw Error(ErrorCode::kNonFiniteValue, "score table");
}

ScoreTable load_score_table(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  ScoreTable table;
  std::vector<std::vector<double>> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (header) {
      for (std::size_t i = 1; i < fields.size(); ++i) table.methods.emplace_back(trim(fields[i]));
      header = false;
      continue;
    }
    if (fields.size() != table.methods.size() + 1) {
      throw Error(ErrorCode::kDimensionMismatch, "score row width differs from the header");
    }
    table.datasets.emplace_back(trim(fields[0]));
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      try {
        std::size_t used = 0;
        const std::string field(trim(fields[i]));
        row.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParse, "bad score '" + fields[i] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  table.scores.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.methods.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  table.validate();
  return table;
}

Eigen::MatrixXd rank_rows(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd ranks(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    std::vector<double> row(scores.row(r).data(), scores.row(r).data() + 0);
    row.clear();
    for (Eigen::Index c = 0; c < scores.cols(); ++c) row.push_back(scores(r, c));
    const auto rk = average_ranks(row, /*descending=*/true);
    for (Eigen::Index c = 0; c < scores.cols(); ++c) ranks(r, c) = rk[static_cast<std::size_t>(c)];
  }
  return ranks;
}

double nemenyi_q(int k, double alpha) {
  if (k < 2 || k > 10) throw Error(ErrorCode::kInvalidArgument, "Nemenyi table covers k in [2, 10]");
  if (std::abs(alpha - 0.05) < 1e-12) return kNemenyiQ05[k - 2];
  if (std::abs(alpha - 0.10) < 1e-12) return kNemenyiQ10[k - 2];
  throw Error(ErrorCode::kInvalidArgument, "Nemenyi table covers alpha 0.05 and 0.10");
}

RankSummary friedman_nemenyi(const ScoreTable& table, double alpha, FriedmanPValue mode) {
  table.validate();
  const auto n = static_cast<double>(table.datasets.size());
  const int k = static_cast<int>(table.methods.size());
  const auto kd = static_cast<double>(k);
  const double q = nemenyi_q(k, alpha);

  const Eigen::MatrixXd ranks = rank_rows(table.scores);
  RankSummary out;
  out.methods = table.methods;
  out.alpha = alpha;
  double spread = 0.0;
  const double centre = 0.5 * (kd + 1.0);
  for (Eigen::Index c = 0; c < ranks.cols(); ++c) {
    const double mean_rank = ranks.col(c).mean();
    out.avg_ranks.push_back(mean_rank);
    spread += (mean_rank - centre) * (mean_rank - centre);
  }
  // Σ(R̄ − (k+1)/2)² equals Σ R̄² − k(k+1)²/4 and is exactly zero on full ties.
  out.friedman_statistic = 12.0 * n / (kd * (kd + 1.0)) * spread;

  const boost::math::chi_squared chi2(kd - 1.0);
  if (mode == FriedmanPValue::kChiSquare) {
    out.p_value = boost::math::cdf(boost::math::complement(chi2, out.friedman_statistic));
  } else {
    const double denom = n * (kd - 1.0) - out.friedman_statistic;
    if (denom <= 0.0) {
      out.iman_davenport_statistic = std::numeric_limits<double>::infinity();
      out.p_value = 0.0;
    } else {
      const double f = (n - 1.0) * out.friedman_statistic / denom;
      out.iman_davenport_statistic = f;
      const boost::math::fisher_f dist(kd - 1.0, (kd - 1.0) * (n - 1.0));
      out.p_value = boost::math::cdf(boost::math::complement(dist, f));
    }
  }
  out.critical_difference = q * std::sqrt(kd * (kd + 1.0) / (6.0 * n));
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      if (std::abs(out.avg_ranks[static_cast<std::size_t>(i)] -
                   out.avg_ranks[static_cast<std::size_t>(j)]) > out.critical_difference) {
        out.significant_pairs.emplace_back(table.methods[static_cast<std::size_t>(i)],
                                           table.methods[static_cast<std::size_t>(j)]);
      }
    }
  }
  return out;
}

nlohmann::ordered_json to_json(const RankSummary& summary) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json ranks = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < summary.methods.size(); ++i) {
    ranks[summary.methods[i]] = summary.avg_ranks[i];
  }
  j["avg_ranks"] = std::move(ranks);
  j["friedman_statistic"] = summary.friedman_statistic;
  if (summary.iman_davenport_statistic) j["iman_davenport_statistic"] = *summary.iman_davenport_statistic;
  j["p_value"] = summary.p_value;
  j["alpha"] = summary.alpha;
  j["critical_difference"] = summary.critical_difference;
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  for (const auto& [a, b] : summary.significant_pairs) pairs.push_back({a, b});
  j["significant_pairs"] = std::move(pairs);
  return j;
}

std::string rank_report_markdown(const RankSummary& summary) {
  std::vector<std::size_t> order(summary.methods.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return summary.avg_ranks[a] < summary.avg_ranks[b];
  });
  std::string out = "# Method ranking\n\n| Method | Average rank |\n|---|---|\n";
  for (auto i : order) {
    out += "| " + summary.methods[i] + " | " + format_fixed(summary.avg_ranks[i], 3) + " |\n";
  }
  out += "\n";
  out += "- Friedman statistic: " + format_fixed(summary.friedman_statistic, 4) + "\n";
  if (summary.iman_davenport_statistic) {
    out += "- Iman-Davenport statistic: " + format_fixed(*summary.iman_davenport_statistic, 4) + "\n";
  }
  out += "- p-value: " + format_fixed(summary.p_value, 4) + "\n";
  out += "- Nemenyi critical difference (alpha = " + format_fixed(summary.alpha, 2) +
         "): " + format_fixed(summary.critical_difference, 4) + "\n";
  out += "\n## Significant pairs\n\n";
  if (summary.significant_pairs.empty()) {
    out += "None.\n";
  } else {
    for (const auto& [a, b] : summary.significant_pairs) out += "- " + a + " vs " + b + "\n";
  }
  return out;
}

double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "spearman needs two equal-length samples");
  }
  const auto ra = average_ranks(a, false);
  const auto rb = average_ranks(b, false);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

ParameterImportance parameter_importance(const Eigen::MatrixXd& features,
                                         const std::vector<double>& scores,
                                         std::vector<std::string> names,
                                         const ImportanceOptions& options) {
  if (features.rows() < 10) {
    throw Error(ErrorCode::kInsufficientData, "parameter importance needs at least 10 trials");
  }
  if (static_cast<Eigen::Index>(scores.size()) != features.rows() ||
      static_cast<Eigen::Index>(names.size()) != features.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "importance inputs disagree in shape");
  }
  const auto p = static_cast<std::size_t>(features.cols());
  const auto t = static_cast<std::size_t>(features.rows());

  ParameterImportance out;
  out.parameters = std::move(names);
  double abs_total = 0.0;
  for (std::size_t f = 0; f < p; ++f) {
    std::vector<double> column(t);
    for (std::size_t r = 0; r < t; ++r) column[r] = features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f));
    const double rho = spearman_correlation(column, scores);
    out.spearman.push_back(rho);
    abs_total += std::abs(rho);
  }
  for (double rho : out.spearman) {
    out.correlation_share.push_back(abs_total > 0.0 ? std::abs(rho) / abs_total : 0.0);
  }

  std::vector<double> importance(p, 0.0);
  Rng rng(options.seed);
  for (int tree = 0; tree < options.trees; ++tree) {
    std::vector<std::size_t> sample(t);
    for (auto& s : sample) s = static_cast<std::size_t>(uniform_below(rng, t));
    std::sort(sample.begin(), sample.end());
    TreeBuilder builder{features, scores, options.max_depth, importance};
    builder.grow(std::move(sample), 0);
  }
  const double total = std::accumulate(importance.begin(), importance.end(), 0.0);
  for (double v : importance) {
    out.forest_importance.push_back(total > 0.0 ? v / total : 1.0 / static_cast<double>(p));
  }
  return out;
}

ParameterImportance parameter_importance(const std::vector<TrialRecord>& trace,
                                         const ThetaEncoding& encoding,
                                         const ImportanceOptions& options) {
  if (trace.size() < 10) {
    throw Error(ErrorCode::kInsufficientData, "parameter importance needs at least 10 trials");
  }
  Eigen::MatrixXd features(static_cast<Eigen::Index>(trace.size()), encoding.dim());
  std::vector<double> scores;
  for (std::size_t r = 0; r < trace.size(); ++r) {
    features.row(static_cast<Eigen::Index>(r)) = encoding.encode(trace[r].config).transpose();
    scores.push_back(trace[r].mean_f1);
  }
  return parameter_importance(features, scores, encoding.coordinate_names(), options);
}

nlohmann::ordered_json to_json(const ParameterImportance& importance) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < importance.parameters.size(); ++i) {
    nlohmann::ordered_json row;
    row["parameter"] = importance.parameters[i];
    row["spearman"] = importance.spearman[i];
    row["correlation_share"] = importance.correlation_share[i];
    row["forest_importance"] = importance.forest_importance[i];
    j.push_back(std::move(row));
  }
  return j;
}

std::string render_report(const std::vector<ReportRow>& rows, ReportFormat format) {
  if (rows.empty()) throw Error(ErrorCode::kInvalidArgument, "report has no rows");
  std::vector<std::string> modalities;
  for (const auto& row : rows) {
    if (!row.config) continue;
    for (const auto& e : row.config->entries) {
      if (std::find(modalities.begin(), modalities.end(), e.modality) == modalities.end()) {
        modalities.push_back(e.modality);
      }
    }
  }
  const bool md = format == ReportFormat::kMarkdown;
  std::vector<std::string> header{"Dataset", "Method"};
  for (const auto& m : modalities) header.push_back(md ? "α_" + m : "alpha_" + m);
  for (const auto& m : modalities) header.push_back("l_" + m);
  header.push_back("l_final");
  for (const char* h : {"F1 (%)", "Prec. (%)", "Rec. (%)"}) header.emplace_back(h);

  auto text_or_missing = [](const std::string& s) { return s.empty() ? std::string(kMissingValue) : s; };
  auto percent = [](const std::optional<double>& v) {
    return v ? format_fixed(*v * 100.0, 2) : std::string(kMissingValue);
  };

  std::vector<std::vector<std::string>> body;
  for (const auto& row : rows) {
    std::vector<std::string> cells{text_or_missing(row.dataset), text_or_missing(row.method)};
    for (const auto& m : modalities) {
      const ModalitySetting* e = row.config ? row.config->find(m) : nullptr;
      cells.push_back(e ? format_alpha(e->alpha) : kMissingValue);
    }
    for (const auto& m : modalities) {
      const ModalitySetting* e = row.config ? row.config->find(m) : nullptr;
      cells.push_back(e ? std::to_string(e->l) : kMissingValue);
    }
    cells.push_back(row.l_final > 0 ? std::to_string(row.l_final) : kMissingValue);
    cells.push_back(percent(row.f1));
    cells.push_back(percent(row.precision));
    cells.push_back(percent(row.recall));
    body.push_back(std::move(cells));
  }

  std::string out;
  auto join = [&](const std::vector<std::string>& cells) {
    std::string line = md ? "| " : "";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += md ? " | " : ",";
      line += cells[i];
    }
    line += md ? " |\n" : "\n";
    return line;
  };
  out += join(header);
  if (md) {
    std::string sep = "|";
    for (std::size_t i = 0; i < header.size(); ++i) sep += "---|";
    out += sep + "\n";
  }
  for (const auto& cells : body) out += join(cells);
  return out;
}

void emit_report(const std::vector<ReportRow>& rows, ReportFormat format,
                 const std::filesystem::path& path) {
  write_file_atomic(path, render_report(rows, format));
}

}  // namespace fudoba
