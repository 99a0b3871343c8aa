// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include "fudoba/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

#include "fudoba/error.hpp"
#include "fudoba/io_util.hpp"

namespace fudoba {

const ModalitySetting* FusionConfig::find(std::string_view modality) const {
  for (const auto& e : entries) {
    if (e.modality == modality) return &e;
  }
  return nullptr;
}

int FusionConfig::output_dim() const {
  int total = 0;
  for (const auto& e : entries) {
    if (e.alpha > 0.0) total += e.l;
  }
  return total;
}

void FusionConfig::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.modality).second) {
      throw Error(ErrorCode::kInvalidArgument, "modality '" + e.modality + "' repeats");
    }
    if (e.l < 1) {
      throw Error(ErrorCode::kInvalidArgument, "l for '" + e.modality + "' must be >= 1");
    }
    if (!(e.alpha >= 0.0 && e.alpha <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "alpha for '" + e.modality + "' not in [0, 1]");
    }
  }
}

nlohmann::ordered_json to_json(const FusionConfig& config) {
  nlohmann::ordered_json mods = nlohmann::ordered_json::object();
  for (const auto& e : config.entries) {
    mods[e.modality] = {{"l", e.l}, {"alpha", e.alpha}};
  }
  return {{"modalities", std::move(mods)}};
}

FusionConfig fusion_config_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object() || !j.contains("modalities") || !j["modalities"].is_object()) {
    throw Error(ErrorCode::kParse, "fusion config needs a 'modalities' object");
  }
  FusionConfig config;
  for (const auto& [name, v] : j["modalities"].items()) {
    try {
      config.entries.push_back({name, v.at("l").get<int>(), v.at("alpha").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "modality '" + name + "': " + e.what());
    }
  }
  config.validate();
  return config;
}

FusionConfig load_fusion_config(const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return fusion_config_from_json(j);
}

SearchSpace SearchSpace::with_defaults(std::vector<std::string> modalities) {
  SearchSpace s;
  s.modalities = std::move(modalities);
  return s;
}

void SearchSpace::validate() const {
  if (modalities.empty() || l_choices.empty() || alpha_choices.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "search space has an empty choice set");
  }
  if (!std::is_sorted(l_choices.begin(), l_choices.end()) ||
      std::adjacent_find(l_choices.begin(), l_choices.end()) != l_choices.end() ||
      l_choices.front() < 1) {
    throw Error(ErrorCode::kInvalidArgument, "l choices must be distinct, ascending, >= 1");
  }
  if (!std::is_sorted(alpha_choices.begin(), alpha_choices.end()) ||
      std::adjacent_find(alpha_choices.begin(), alpha_choices.end()) != alpha_choices.end() ||
      alpha_choices.front() < 0.0 || alpha_choices.back() > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "alpha choices must be distinct, ascending, in [0,1]");
  }
}

std::size_t SearchSpace::size() const {
  std::size_t n = 1;
  for (std::size_t m = 0; m < modalities.size(); ++m) n *= l_choices.size();
  for (std::size_t m = 0; m < modalities.size(); ++m) n *= alpha_choices.size();
  return n;
}

FusionConfig SearchSpace::config_at(std::size_t index) const {
  const std::size_t m_count = modalities.size();
  std::vector<std::size_t> digits(2 * m_count);
  for (std::size_t k = 2 * m_count; k-- > 0;) {
    const std::size_t radix = k < m_count ? l_choices.size() : alpha_choices.size();
    digits[k] = index % radix;
    index /= radix;
  }
  FusionConfig config;
  config.entries.reserve(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    config.entries.push_back(
        {modalities[m], l_choices[digits[m]], alpha_choices[digits[m_count + m]]});
  }
  return config;
}

std::optional<std::size_t> SearchSpace::index_of(const FusionConfig& config) const {
  if (config.entries.size() != modalities.size()) return std::nullopt;
  std::size_t index = 0;
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    const auto* e = config.find(modalities[m]);
    if (!e) return std::nullopt;
    auto it = std::find(l_choices.begin(), l_choices.end(), e->l);
    if (it == l_choices.end()) return std::nullopt;
    index = index * l_choices.size() + static_cast<std::size_t>(it - l_choices.begin());
  }
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    const auto* e = config.find(modalities[m]);
    auto it = std::find_if(alpha_choices.begin(), alpha_choices.end(),
                           [&](double a) { return std::abs(a - e->alpha) < 1e-12; });
    if (it == alpha_choices.end()) return std::nullopt;
    index = index * alpha_choices.size() + static_cast<std::size_t>(it - alpha_choices.begin());
  }
  return index;
}

std::vector<FusionConfig> enumerate_configs(const SearchSpace& space) {
  space.validate();
  std::vector<FusionConfig> out;
  const std::size_t n = space.size();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(space.config_at(i));
  return out;
}

void check_aligned(std::span<const EmbeddingMatrix> matrices, const LabeledDataset& labels) {
  if (matrices.empty()) throw Error(ErrorCode::kInvalidArgument, "no modality matrices");
  for (const auto& m : matrices) {
    validate(m);
    if (m.row_ids != labels.row_ids) {
      throw Error(ErrorCode::kUnalignedInputs,
                  "modality '" + m.modality_name + "' is not aligned with the labels");
    }
  }
}

ProjectionCache::ProjectionCache(std::span<const EmbeddingMatrix> matrices,
                                 const LabeledDataset& labels, int max_rank,
                                 const NormWeights& weights)
    : row_ids_(labels.row_ids), labels_(labels), weights_(weights) {
  check_aligned(matrices, labels);
  weights_.validate();
  if (max_rank < 1) throw Error(ErrorCode::kRankOutOfRange, "max rank must be >= 1");
  std::set<std::string> seen;
  for (const auto& m : matrices) {
    if (!seen.insert(m.modality_name).second) {
      throw Error(ErrorCode::kInvalidArgument, "modality '" + m.modality_name + "' repeats");
    }
    Modality mod;
    mod.normalized = normalized_rows(m.data, weights_);
    mod.rank_bound = std::min(mod.normalized.rows(), mod.normalized.cols());
    mod.svd = fit_truncated_svd(mod.normalized,
                                std::min<Eigen::Index>(max_rank, mod.rank_bound));
    names_.push_back(m.modality_name);
    modalities_.push_back(std::move(mod));
  }
}

Eigen::MatrixXd ProjectionCache::scaled_concatenation(const FusionConfig& config,
                                                      std::vector<ColumnSpan>* spans) const {
  config.validate();
  for (const auto& e : config.entries) {
    if (std::find(names_.begin(), names_.end(), e.modality) == names_.end()) {
      throw Error(ErrorCode::kInvalidArgument, "config names unknown modality '" + e.modality + "'");
    }
  }
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<ColumnSpan> out_spans;
  Eigen::Index cols = 0;
  for (std::size_t m = 0; m < names_.size(); ++m) {
    const auto* setting = config.find(names_[m]);
    if (!setting || setting->alpha == 0.0) continue;
    const auto& mod = modalities_[m];
    Eigen::Index l = setting->l;
    if (l > mod.rank_bound) {
      spdlog::warn("l={} for '{}' exceeds rank bound {}; clamping", l, names_[m], mod.rank_bound);
      l = mod.rank_bound;
    }
    if (l > mod.svd.rank()) {
      throw Error(ErrorCode::kRankOutOfRange, "l=" + std::to_string(l) + " for '" + names_[m] +
                                                  "' exceeds the cached rank " +
                                                  std::to_string(mod.svd.rank()));
    }
    Eigen::MatrixXd block = mod.normalized * mod.svd.components.leftCols(l);
    block *= setting->alpha;
    out_spans.push_back({names_[m], cols, cols + l});
    cols += l;
    blocks.push_back(std::move(block));
  }
  if (blocks.empty()) {
    throw Error(ErrorCode::kNoActiveModalities, "every modality has alpha = 0");
  }
  Eigen::MatrixXd concat(static_cast<Eigen::Index>(row_ids_.size()), cols);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    concat.middleCols(out_spans[b].begin, blocks[b].cols()) = blocks[b];
  }
  if (spans) *spans = std::move(out_spans);
  return concat;
}

FusedDataset ProjectionCache::fuse(const FusionConfig& config) const {
  FusedDataset out;
  out.x = scaled_concatenation(config, &out.column_spans);
  normalize_rows(out.x, weights_);
  out.labels = labels_;
  out.config = config;
  out.row_ids = row_ids_;
  return out;
}

FusedDataset fuse(std::span<const EmbeddingMatrix> matrices, const LabeledDataset& labels,
                  const FusionConfig& config, const NormWeights& weights) {
  config.validate();
  // Fit only the modalities that contribute columns.
  std::vector<EmbeddingMatrix> active;
  int max_l = 1;
  for (const auto& m : matrices) {
    const auto* setting = config.find(m.modality_name);
    if (setting && setting->alpha > 0.0) {
      active.push_back(m);
      max_l = std::max(max_l, setting->l);
    }
  }
  if (active.empty()) {
    throw Error(ErrorCode::kNoActiveModalities, "every modality has alpha = 0");
  }
  check_aligned(matrices, labels);
  FusionConfig active_config;
  for (const auto& e : config.entries) {
    const bool known = std::any_of(matrices.begin(), matrices.end(),
                                   [&](const EmbeddingMatrix& m) { return m.modality_name == e.modality; });
    if (!known) throw Error(ErrorCode::kInvalidArgument, "config names unknown modality '" + e.modality + "'");
    if (e.alpha > 0.0) active_config.entries.push_back(e);
  }
  ProjectionCache cache(active, labels, max_l, weights);
  return cache.fuse(active_config);
}

FusedDataset fuse_concat_project(std::span<const EmbeddingMatrix> matrices,
                                 const LabeledDataset& labels, int p,
                                 const NormWeights& weights) {
  check_aligned(matrices, labels);
  weights.validate();
  Eigen::Index total = 0;
  for (const auto& m : matrices) total += m.dim();
  Eigen::MatrixXd concat(static_cast<Eigen::Index>(labels.size()), total);
  Eigen::Index col = 0;
  for (const auto& m : matrices) {
    concat.middleCols(col, m.dim()) = normalized_rows(m.data, weights);
    col += m.dim();
  }
  const Eigen::Index bound = std::min(concat.rows(), concat.cols());
  if (p < 1 || p > bound) {
    throw Error(ErrorCode::kRankOutOfRange,
                "p=" + std::to_string(p) + " outside [1, " + std::to_string(bound) + "]");
  }
  const auto svd = fit_truncated_svd(concat, p);
  FusedDataset out;
  out.x = project(concat, svd);
  normalize_rows(out.x, weights);
  out.labels = labels;
  out.row_ids = labels.row_ids;
  out.column_spans.push_back({"concat", 0, p});
  return out;
}

}  // namespace fudoba
