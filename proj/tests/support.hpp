#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace s2l::testing {

inline const std::filesystem::path kDataDir = S2L_TEST_DATA_DIR;
inline const std::filesystem::path kFixturesDir = S2L_TEST_FIXTURES_DIR;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("s2l-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

// Minimal OpenAI-style chat completions server on 127.0.0.1.
class StubServer {
 public:
  // Maps the last user message to the assistant reply.
  using Responder = std::function<std::string(const std::string&)>;

  explicit StubServer(Responder responder, std::string token = "test-token")
      : responder_(std::move(responder)), token_(std::move(token)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      if (fail_next_ > 0) {
        --fail_next_;
        res.status = fail_status_;
        res.set_content(R"({"error":{"message":"try later"}})", "application/json");
        return;
      }
      if (req.get_header_value("Authorization") != "Bearer " + token_) {
        res.status = 401;
        res.set_content(R"({"error":{"message":"bad token"}})", "application/json");
        return;
      }
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      std::string user;
      if (!body.is_discarded() && body.contains("messages")) {
        for (const auto& m : body["messages"]) {
          if (m.value("role", "") == "user") user = m.value("content", "");
        }
      }
      std::string reply;
      {
        std::lock_guard lock(mutex_);
        reply = responder_(user);
      }
      nlohmann::json out = {
          {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply}}}}}}};
      res.set_content(out.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }
  int requests() const { return requests_; }
  void fail_next(int count, int status) {
    fail_status_ = status;
    fail_next_ = count;
  }

 private:
  httplib::Server server_;
  Responder responder_;
  std::string token_;
  std::mutex mutex_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
  std::atomic<int> fail_next_{0};
  std::atomic<int> fail_status_{500};
};

}  // namespace s2l::testing
