// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fudoba/embedding_store.hpp"

namespace fudoba {

inline constexpr const char* kApiKeyEnv = "FUDOBA_API_KEY";

/// An OpenAI-compatible embeddings service.
struct EmbedEndpoint {
  /// Scheme, host, optional port and path prefix, e.g. `http://localhost:8080`.
  /// `/v1/embeddings` is appended (or just `/embeddings` when the prefix
  /// already ends in `/v1`).
  std::string base_url;
  std::string model_name;
  std::string api_key;
  int batch_size = 64;
  int timeout_seconds = 60;
  int max_retries = 3;
  double backoff_base_seconds = 1.0;
  double backoff_factor = 2.0;
  /// Each wait is scaled by a factor drawn uniformly from [1 − j, 1 + j].
  double backoff_jitter = 0.25;
  std::uint64_t jitter_seed = 0;

  void validate() const;
};

/// Reads the API key from FUDOBA_API_KEY; empty when unset.
std::string api_key_from_environment();

struct Document {
  std::string id;
  std::string text;
};

/// CSV with header `id,text`.
std::vector<Document> load_documents(const std::filesystem::path& path);

struct EmbedStats {
  int requests = 0;  ///< HTTP requests sent, retries included
  std::size_t cache_hits = 0;
  std::size_t fetched = 0;
};

/// Hex SHA-256 of `model + "\n" + text`.
std::string cache_key(const std::string& model, const std::string& text);
std::filesystem::path cache_path(const std::filesystem::path& cache_dir, const std::string& model,
                                 const std::string& text);

using SleepFn = std::function<void(std::chrono::duration<double>)>;

/// Cache-first embedding of `docs`. Uncached texts are deduplicated and sent
/// in sequential batches; each fresh vector is written to the cache before
/// the matrix is returned. Rows follow `docs` order and values are stored in
/// single precision, so cached and fresh runs agree exactly.
EmbeddingMatrix embed_documents(const std::vector<Document>& docs, const EmbedEndpoint& endpoint,
                                const std::filesystem::path& cache_dir, EmbedStats* stats = nullptr,
                                const SleepFn& sleep = {});

}  // namespace fudoba
