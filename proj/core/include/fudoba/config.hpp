// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "fudoba/evaluator.hpp"
#include "fudoba/fusion.hpp"
#include "fudoba/numerics.hpp"

namespace fudoba {

/// A value from the flat TOML subset: strings, integers, floats, booleans
/// and single-line arrays of those.
struct TomlValue {
  using Scalar = std::variant<std::string, std::int64_t, double, bool>;
  std::variant<Scalar, std::vector<Scalar>> value;

  bool is_array() const { return value.index() == 1; }
  std::string as_string() const;
  std::int64_t as_int() const;
  double as_double() const;  ///< integers convert
  bool as_bool() const;
  std::vector<std::string> as_string_array() const;
  std::vector<std::int64_t> as_int_array() const;
  std::vector<double> as_double_array() const;
};

/// `[section]` headers and `key = value` lines; keys are stored as
/// "section.key" in file order. Nested tables, inline tables and multi-line
/// values are rejected.
class TomlDocument {
 public:
  static TomlDocument parse(std::string_view text);
  static TomlDocument load(const std::filesystem::path& path);

  const TomlValue* find(std::string_view dotted_key) const;
  /// Keys of one section, in file order, without the section prefix.
  std::vector<std::string> keys(std::string_view section) const;
  const std::vector<std::pair<std::string, TomlValue>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, TomlValue>> entries_;
};

struct EmbedSettings {
  std::string base_url;
  std::string model;
  int batch_size = 64;
  int timeout_seconds = 60;
  int max_retries = 3;
  std::filesystem::path cache_dir = "embed_cache";
};

/// Everything one run needs. Relative paths in a config file are resolved
/// against the file's directory.
struct ExperimentConfig {
  /// Modality name and matrix path, in declaration order.
  std::vector<std::pair<std::string, std::filesystem::path>> modalities;
  std::filesystem::path labels;
  std::vector<int> l_choices{16, 32, 64};
  std::vector<double> alpha_choices{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int budget = 50;
  int n_init = 5;
  std::size_t max_candidates = 50000;
  std::optional<std::uint64_t> seed;
  int folds = 5;
  ClassifierSpec classifier;
  NormWeights norm;
  std::filesystem::path output_dir = "fudoba_out";
  int threads = 1;
  std::string dataset_name;
  EmbedSettings embed;

  /// Applies the sections [data], [modalities], [search], [run], [cv],
  /// [classifier], [norm] and [embed]; unknown keys are errors.
  void apply(const TomlDocument& doc, const std::filesystem::path& base_dir);

  SearchSpace search_space() const;
  CVConfig cv_config() const;
  /// Seed present, files exist, numeric settings in range.
  void validate_for_run() const;
  std::uint64_t require_seed() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace fudoba
