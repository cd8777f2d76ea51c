#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "s2l/core.hpp"

namespace s2l::llm {

struct CompletionRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<int> max_tokens;

  void validate() const;
  const std::string& last_user_content() const;
};

// Lowercase hex SHA-256 over the canonical (sorted-key) JSON form of
// (model, messages, temperature, max_tokens).
std::string cache_key(const CompletionRequest& request);
std::string canonical_json(const CompletionRequest& request);

// One file per digest: `<digest>.txt` holds the raw assistant text and
// `<digest>.json` the request metadata. The first stored response for a key
// wins; later writes for the same key are dropped.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& key) const;
  // Returns false when an entry already existed.
  bool put(const CompletionRequest& request, const std::string& text);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex write_mutex_;
};

struct LiveSpec {
  std::string endpoint;   // e.g. https://api.example.com/v1/chat/completions
  std::string token_env;  // name of the environment variable holding the bearer token
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::seconds timeout{120};
};

struct MockSpec {
  // Keyed by the content of the last user message.
  std::map<std::string, std::string> fixtures;
  // Consulted when no fixture matches.
  std::function<std::optional<std::string>(const CompletionRequest&)> responder;
};

struct ReplaySpec {
  std::filesystem::path cache_dir;
  bool strict = true;
  // Non-strict replay forwards misses here (and records the result).
  std::optional<LiveSpec> fallback;
};

using BackendSpec = std::variant<LiveSpec, MockSpec, ReplaySpec>;

struct CacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t calls = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
  CacheStats stats() const;

 protected:
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
  std::atomic<std::size_t> calls_{0};
};

// `cache_dir` enables write-through caching for live and mock backends. A
// live backend always answers from the cache first when one is configured.
std::unique_ptr<Backend> make_backend(const BackendSpec& spec,
                                      std::optional<std::filesystem::path> cache_dir = {});

// Validates the request, runs it and rejects empty or whitespace-only text.
std::string complete(const CompletionRequest& request, Backend& backend);

struct ConversionPrompt {
  std::string task_id;
  std::string template_text;  // exactly one `{symbol}`

  void validate() const;
  std::string render(const std::string& symbol) const;

  static ConversionPrompt load(const std::string& task_id, const std::filesystem::path& path);
};

// Which span kinds a conversion prompt for `task_id` may be applied to.
bool prompt_accepts(const std::string& task_id, SpanKind kind);

Rendering convert_with_model(const SymbolSpan& span, const ConversionPrompt& prompt,
                             Backend& backend, const std::string& model);

CompletionRequest conversion_request(const SymbolSpan& span, const ConversionPrompt& prompt,
                                     const std::string& model);

}  // namespace s2l::llm
