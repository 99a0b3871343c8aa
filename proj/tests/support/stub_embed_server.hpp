// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace fudoba::testing {

/// In-process OpenAI-compatible embeddings server. Vectors are a hash of the
/// text, so the same text always gets the same vector.
class StubEmbedServer {
 public:
  explicit StubEmbedServer(int dim = 8) : dim_(dim) {
    server_.Post(R"(/.*embeddings)", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++requests_;
      last_path_ = req.path;
      last_auth_ = req.get_header_value("Authorization");
      if (n <= fail_first_) {
        res.status = fail_status_;
        res.set_content(R"({"error":"try later"})", "application/json");
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json data = nlohmann::json::array();
      const auto& input = body.at("input");
      for (std::size_t i = 0; i < input.size(); ++i) {
        const auto text = input[i].get<std::string>();
        const int d = drift_ && i == input.size() - 1 ? dim_.load() + 1 : dim_.load();
        data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", vector_for(text, d)}});
      }
      // Reverse the order to check that clients sort by index.
      nlohmann::json reversed = nlohmann::json::array();
      for (auto it = data.rbegin(); it != data.rend(); ++it) reversed.push_back(*it);
      res.set_content(nlohmann::json{{"object", "list"}, {"data", reversed}, {"model", body.at("model")}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubEmbedServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  StubEmbedServer(const StubEmbedServer&) = delete;
  StubEmbedServer& operator=(const StubEmbedServer&) = delete;

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_; }
  void reset_requests() { requests_ = 0; }
  void fail_first(int n, int status) {
    fail_first_ = n;
    fail_status_ = status;
  }
  void set_dimension_drift(bool on) { drift_ = on; }
  void set_dim(int dim) { dim_ = dim; }
  std::string last_path() const { return last_path_; }
  std::string last_auth() const { return last_auth_; }

  static std::vector<double> vector_for(const std::string& text, int dim) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) h = (h ^ c) * 1099511628211ull;
    std::vector<double> v;
    for (int i = 0; i < dim; ++i) {
      h ^= h >> 33;
      h *= 0xff51afd7ed558ccdull;
      h ^= h >> 29;
      v.push_back(static_cast<double>(h % 20001) / 10000.0 - 1.0 + 1e-7);
    }
    return v;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> dim_;
  std::atomic<int> requests_{0};
  std::atomic<int> fail_first_{0};
  std::atomic<int> fail_status_{500};
  std::atomic<bool> drift_{false};
  std::string last_path_;
  std::string last_auth_;
};

}  // namespace fudoba::testing
