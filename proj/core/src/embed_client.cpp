// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include "fudoba/embed_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "fudoba/error.hpp"
#include "fudoba/io_util.hpp"
#include "fudoba/random.hpp"

namespace fudoba {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "base_url needs a scheme: " + url);
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_begin);
  std::string prefix = path_begin == std::string::npos ? "" : url.substr(path_begin);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  const bool has_version = prefix.size() >= 3 && prefix.compare(prefix.size() - 3, 3, "/v1") == 0;
  out.path = prefix + (has_version ? "/embeddings" : "/v1/embeddings");
  return out;
}

std::string safe_component(std::string s) {
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
  }
  return s.empty() ? "_" : s;
}

std::vector<std::vector<double>> parse_response(const std::string& body, std::size_t expected) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kNetwork, std::string("malformed embeddings response: ") + e.what());
  }
  if (!j.contains("data") || !j["data"].is_array() || j["data"].size() != expected) {
    throw Error(ErrorCode::kNetwork, "embeddings response has the wrong number of items");
  }
  std::vector<std::pair<std::size_t, std::vector<double>>> items;
  std::size_t position = 0;
  for (const auto& item : j["data"]) {
    const std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : position;
    items.emplace_back(index, item.at("embedding").get<std::vector<double>>());
    ++position;
  }
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].first != i) throw Error(ErrorCode::kNetwork, "embeddings response indices are not 0..n-1");
    out.push_back(std::move(items[i].second));
  }
  return out;
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

void EmbedEndpoint::validate() const {
  if (base_url.empty()) throw Error(ErrorCode::kInvalidArgument, "endpoint base_url is empty");
  if (model_name.empty()) throw Error(ErrorCode::kInvalidArgument, "endpoint model name is empty");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (timeout_seconds < 1) throw Error(ErrorCode::kInvalidArgument, "timeout must be >= 1 s");
  if (max_retries < 0) throw Error(ErrorCode::kInvalidArgument, "max_retries must be >= 0");
  if (backoff_base_seconds < 0.0 || backoff_factor < 1.0 || backoff_jitter < 0.0 ||
      backoff_jitter > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid backoff settings");
  }
}

std::string api_key_from_environment() {
  const char* key = std::getenv(kApiKeyEnv);
  return key ? std::string(key) : std::string();
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<Document> docs;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header) {
      header = false;
      continue;
    }
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) {
      throw Error(ErrorCode::kParse, "document rows need exactly id,text: " + line);
    }
    docs.push_back({std::string(trim(fields[0])), fields[1]});
  }
  if (docs.empty()) throw Error(ErrorCode::kEmptyFile, path.string());
  return docs;
}

std::string cache_key(const std::string& model, const std::string& text) {
  const std::string payload = model + "\n" + text;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(payload.data(), payload.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

std::filesystem::path cache_path(const std::filesystem::path& cache_dir, const std::string& model,
                                 const std::string& text) {
  return cache_dir / safe_component(model) / (cache_key(model, text) + ".vec");
}

EmbeddingMatrix embed_documents(const std::vector<Document>& docs, const EmbedEndpoint& endpoint,
                                const std::filesystem::path& cache_dir, EmbedStats* stats,
                                const SleepFn& sleep) {
  if (docs.empty()) throw Error(ErrorCode::kInvalidArgument, "no documents to embed");
  if (endpoint.model_name.empty()) throw Error(ErrorCode::kInvalidArgument, "endpoint model name is empty");
  if (endpoint.batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  EmbedStats local;
  EmbedStats& st = stats ? *stats : local;
  st = {};

  std::map<std::string, std::vector<double>> vectors;  // text -> vector
  std::vector<std::string> pending;
  long dim = -1;
  auto check_dim = [&](std::size_t d, const char* source) {
    if (dim < 0) dim = static_cast<long>(d);
    if (static_cast<long>(d) != dim || d == 0) {
      throw Error(ErrorCode::kDimensionDrift, std::string(source) + " vector has dimension " +
                                                  std::to_string(d) + ", expected " + std::to_string(dim));
    }
  };

  for (const auto& doc : docs) {
    if (doc.text.empty()) spdlog::warn("document '{}' has empty text; embedding it as is", doc.id);
    if (vectors.count(doc.text)) continue;
    const auto path = cache_path(cache_dir, endpoint.model_name, doc.text);
    if (std::filesystem::exists(path)) {
      const auto cached = decode_fdb1(read_file(path));
      if (cached.rows() != 1) throw Error(ErrorCode::kParse, "cache entry must hold one row: " + path.string());
      check_dim(static_cast<std::size_t>(cached.dim()), "cached");
      vectors[doc.text] = std::vector<double>(cached.data.data(), cached.data.data() + cached.dim());
      ++st.cache_hits;
    } else if (std::find(pending.begin(), pending.end(), doc.text) == pending.end()) {
      pending.push_back(doc.text);
    }
  }

  if (!pending.empty()) {
    endpoint.validate();
    const SplitUrl url = split_url(endpoint.base_url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(endpoint.timeout_seconds, 0);
    client.set_read_timeout(endpoint.timeout_seconds, 0);
    client.set_write_timeout(endpoint.timeout_seconds, 0);
    httplib::Headers headers;
    if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

    Rng jitter_rng(derive_seed(endpoint.jitter_seed, "backoff"));
    const SleepFn do_sleep = sleep ? sleep : [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
    const auto batch = static_cast<std::size_t>(endpoint.batch_size);

    for (std::size_t begin = 0; begin < pending.size(); begin += batch) {
      const std::size_t end = std::min(pending.size(), begin + batch);
      const std::vector<std::string> texts(pending.begin() + static_cast<long>(begin),
                                           pending.begin() + static_cast<long>(end));
      const std::string body = nlohmann::json{{"model", endpoint.model_name}, {"input", texts}}.dump();

      std::string last_error;
      std::vector<std::vector<double>> fresh;
      for (int attempt = 0;; ++attempt) {
        ++st.requests;
        auto res = client.Post(url.path, headers, body, "application/json");
        if (res && res->status >= 200 && res->status < 300) {
          fresh = parse_response(res->body, texts.size());
          break;
        }
        last_error = res ? "HTTP " + std::to_string(res->status) + ": " + res->body
                         : "request failed: " + httplib::to_string(res.error());
        if ((res && !retryable(res->status)) || attempt >= endpoint.max_retries) {
          throw Error(ErrorCode::kNetwork, last_error);
        }
        const double scale = 1.0 + endpoint.backoff_jitter * (2.0 * uniform01(jitter_rng) - 1.0);
        const double wait = endpoint.backoff_base_seconds * std::pow(endpoint.backoff_factor, attempt) * scale;
        spdlog::warn("embedding request failed ({}); retrying in {:.2f} s", last_error, wait);
        do_sleep(std::chrono::duration<double>(wait));
      }

      for (std::size_t i = 0; i < texts.size(); ++i) {
        check_dim(fresh[i].size(), "fresh");
        EmbeddingMatrix entry;
        entry.row_ids = {cache_key(endpoint.model_name, texts[i])};
        entry.data.resize(1, static_cast<Eigen::Index>(fresh[i].size()));
        for (std::size_t c = 0; c < fresh[i].size(); ++c) {
          if (!std::isfinite(fresh[i][c])) throw Error(ErrorCode::kNonFiniteValue, "embedding response");
          // Stored as f32; round now so fresh and cached runs agree.
          fresh[i][c] = static_cast<double>(static_cast<float>(fresh[i][c]));
          entry.data(0, static_cast<Eigen::Index>(c)) = fresh[i][c];
        }
        write_file_atomic(cache_path(cache_dir, endpoint.model_name, texts[i]), encode_fdb1(entry));
        vectors[texts[i]] = std::move(fresh[i]);
        ++st.fetched;
      }
    }
  }

  EmbeddingMatrix out;
  out.modality_name = "llm";
  out.data.resize(static_cast<Eigen::Index>(docs.size()), dim);
  for (std::size_t r = 0; r < docs.size(); ++r) {
    out.row_ids.push_back(docs[r].id);
    const auto& v = vectors.at(docs[r].text);
    for (long c = 0; c < dim; ++c) out.data(static_cast<Eigen::Index>(r), c) = v[static_cast<std::size_t>(c)];
  }
  validate(out);
  return out;
}

}  // namespace fudoba
