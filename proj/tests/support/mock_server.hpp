// Copyright 2026 The vtune Authors
// SPDX-License-Identifier: Apache-2.0
//
// In-process HTTP server standing in for an OpenAI-compatible endpoint.

#pragma once

#include <chrono>
#include <string>
#include <thread>

#include <httplib.h>

namespace vtune::testing {

class MockServer {
 public:
  MockServer() = default;
  ~MockServer() { stop(); }
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  httplib::Server& server() { return server_; }

  /// Binds an ephemeral loopback port and serves on a background thread.
  void start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace vtune::testing
