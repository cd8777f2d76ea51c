#include "s2l/llm.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "s2l/error.hpp"
#include "s2l/text.hpp"

namespace s2l::llm {

using nlohmann::json;

void CompletionRequest::validate() const {
  if (model.empty()) throw Error(ErrorKind::kArgument, "completion request has no model");
  if (!(temperature >= 0.0)) throw Error(ErrorKind::kArgument, "temperature must be >= 0");
  if (max_tokens && *max_tokens <= 0) throw Error(ErrorKind::kArgument, "max_tokens must be positive");
  bool has_user = false;
  for (const auto& m : messages) {
    if (m.content.empty()) throw Error(ErrorKind::kArgument, "chat message with empty content");
    if (m.role == Role::kUser) has_user = true;
  }
  if (!has_user) throw Error(ErrorKind::kArgument, "completion request has no user message");
}

const std::string& CompletionRequest::last_user_content() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::kUser) return it->content;
  }
  throw Error(ErrorKind::kArgument, "completion request has no user message");
}

namespace {

json request_json(const CompletionRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body = {{"model", request.model}, {"messages", messages}, {"temperature", request.temperature}};
  if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
  return body;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "SHA-256 computation failed");
  }
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

bool is_blank(const std::string& s) { return text::trim(s).empty(); }

std::string unique_suffix() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  char buf[32];
  std::snprintf(buf, sizeof buf, ".tmp%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

// Writes `content` to `target` only if it does not exist yet.
bool write_once(const std::filesystem::path& target, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path tmp = target;
  tmp += unique_suffix();
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    out << content;
  }
  std::error_code ec;
  fs::create_hard_link(tmp, target, ec);
  fs::remove(tmp);
  return !ec;
}

class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockSpec spec) : spec_(std::move(spec)) {}

  std::string complete(const CompletionRequest& request) override {
    ++calls_;
    const std::string& prompt = request.last_user_content();
    if (auto it = spec_.fixtures.find(prompt); it != spec_.fixtures.end()) return it->second;
    if (spec_.responder) {
      if (auto reply = spec_.responder(request)) return *reply;
    }
    std::string preview = prompt.substr(0, 60);
    throw Error(ErrorKind::kBackend, "mock backend has no fixture for prompt '" + preview + "'");
  }

 private:
  MockSpec spec_;
};

class LiveBackend final : public Backend {
 public:
  explicit LiveBackend(LiveSpec spec) : spec_(std::move(spec)) {
    if (spec_.endpoint.empty()) throw Error(ErrorKind::kConfig, "live backend needs an endpoint URL");
    if (spec_.token_env.empty()) {
      throw Error(ErrorKind::kConfig, "live backend needs the name of a token environment variable");
    }
    if (spec_.max_attempts < 1) throw Error(ErrorKind::kConfig, "max_attempts must be >= 1");
    auto scheme_end = spec_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
      throw Error(ErrorKind::kConfig, "endpoint '" + spec_.endpoint + "' has no scheme");
    }
    auto path_start = spec_.endpoint.find('/', scheme_end + 3);
    origin_ = spec_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : spec_.endpoint.substr(path_start);
  }

  std::string complete(const CompletionRequest& request) override {
    ++calls_;
    const char* token = std::getenv(spec_.token_env.c_str());
    if (token == nullptr) {
      throw Error(ErrorKind::kBackend, "environment variable " + spec_.token_env + " is not set");
    }
    httplib::Client client(origin_);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(spec_.timeout);
    client.set_write_timeout(spec_.timeout);
    httplib::Headers headers = {{"Authorization", std::string("Bearer ") + token}};
    const std::string body = request_json(request).dump();

    std::string last_problem;
    std::optional<int> last_status;
    auto backoff = spec_.initial_backoff;
    for (int attempt = 1; attempt <= spec_.max_attempts; ++attempt) {
      if (attempt > 1) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      auto res = client.Post(path_, headers, body, "application/json");
      if (!res) {
        last_problem = "transport failure: " + httplib::to_string(res.error());
        last_status.reset();
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_problem = "HTTP " + std::to_string(res->status);
        last_status = res->status;
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        Error err(ErrorKind::kBackend, "HTTP " + std::to_string(res->status) + " from " +
                                           spec_.endpoint + ": " + res->body.substr(0, 200));
        err.http_status = res->status;
        throw err;
      }
      return parse_reply(res->body);
    }
    Error err(ErrorKind::kBackend, "giving up after " + std::to_string(spec_.max_attempts) +
                                       " attempts: " + last_problem);
    err.http_status = last_status;
    throw err;
  }

 private:
  static std::string parse_reply(const std::string& body) {
    json reply = json::parse(body, nullptr, false);
    if (reply.is_discarded()) throw Error(ErrorKind::kBackend, "response body is not JSON");
    try {
      const json& content = reply.at("choices").at(0).at("message").at("content");
      if (content.is_null()) return {};
      return content.get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kBackend, std::string("unexpected response shape: ") + e.what());
    }
  }

  LiveSpec spec_;
  std::string origin_;
  std::string path_;
};

// Answers from the cache; misses go to `inner` (written through) or fail.
class CachingBackend final : public Backend {
 public:
  CachingBackend(std::unique_ptr<Backend> inner, std::filesystem::path dir)
      : inner_(std::move(inner)), cache_(std::move(dir)) {}

  std::string complete(const CompletionRequest& request) override {
    ++calls_;
    const std::string key = cache_key(request);
    if (auto hit = cache_.get(key)) {
      ++hits_;
      return *hit;
    }
    ++misses_;
    if (!inner_) {
      Error err(ErrorKind::kCacheMiss, "no cached response for " + key);
      err.key = key;
      throw err;
    }
    std::string text = inner_->complete(request);
    if (!is_blank(text)) {
      cache_.put(request, text);
      // Keep the first stored response if another writer got there first.
      if (auto stored = cache_.get(key)) return *stored;
    }
    return text;
  }

 private:
  std::unique_ptr<Backend> inner_;
  ResponseCache cache_;
};

}  // namespace

std::string canonical_json(const CompletionRequest& request) {
  // nlohmann::json objects keep keys sorted, so dump() is canonical.
  json body = request_json(request);
  if (!request.max_tokens) body["max_tokens"] = nullptr;
  return body.dump();
}

std::string cache_key(const CompletionRequest& request) { return sha256_hex(canonical_json(request)); }

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create cache directory " + dir_.string());
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::ifstream in(dir_ / (key + ".txt"), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool ResponseCache::put(const CompletionRequest& request, const std::string& text) {
  const std::string key = cache_key(request);
  std::lock_guard lock(write_mutex_);
  if (!write_once(dir_ / (key + ".txt"), text)) return false;
  json meta = request_json(request);
  meta["key"] = key;
  write_once(dir_ / (key + ".json"), meta.dump(2) + "\n");
  return true;
}

CacheStats Backend::stats() const { return {hits_.load(), misses_.load(), calls_.load()}; }

std::unique_ptr<Backend> make_backend(const BackendSpec& spec,
                                      std::optional<std::filesystem::path> cache_dir) {
  return std::visit(
      [&](const auto& s) -> std::unique_ptr<Backend> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ReplaySpec>) {
          std::unique_ptr<Backend> inner;
          if (!s.strict && s.fallback) inner = std::make_unique<LiveBackend>(*s.fallback);
          if (!s.strict && !s.fallback) {
            throw Error(ErrorKind::kConfig, "non-strict replay needs a live fallback");
          }
          return std::make_unique<CachingBackend>(std::move(inner), s.cache_dir);
        } else {
          std::unique_ptr<Backend> base;
          if constexpr (std::is_same_v<T, LiveSpec>) {
            base = std::make_unique<LiveBackend>(s);
          } else {
            base = std::make_unique<MockBackend>(s);
          }
          if (!cache_dir) return base;
          return std::make_unique<CachingBackend>(std::move(base), *cache_dir);
        }
      },
      spec);
}

std::string complete(const CompletionRequest& request, Backend& backend) {
  request.validate();
  std::string text = backend.complete(request);
  if (is_blank(text)) throw Error(ErrorKind::kEmptyResponse, "backend returned empty text");
  return text;
}

void ConversionPrompt::validate() const {
  std::size_t count = 0;
  for (auto at = template_text.find("{symbol}"); at != std::string::npos;
       at = template_text.find("{symbol}", at + 1)) {
    ++count;
  }
  if (count != 1) {
    throw Error(ErrorKind::kArgument, "conversion prompt for '" + task_id + "' must contain exactly one {symbol}, found " +
                                          std::to_string(count));
  }
}

std::string ConversionPrompt::render(const std::string& symbol) const {
  validate();
  std::string out = template_text;
  out.replace(out.find("{symbol}"), 8, symbol);
  return out;
}

ConversionPrompt ConversionPrompt::load(const std::string& task_id, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open prompt template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  ConversionPrompt prompt{task_id, text};
  prompt.validate();
  return prompt;
}

bool prompt_accepts(const std::string& task_id, SpanKind kind) {
  static const std::map<std::string, SpanKind> kKinds = {
      {"arc", SpanKind::kSequence},  {"dyck", SpanKind::kBrackets},  {"property", SpanKind::kSmiles},
      {"emoji", SpanKind::kEmoji},   {"table_qa", SpanKind::kTable}, {"tabfact", SpanKind::kTable},
      {"sentiment", SpanKind::kTweet}, {"stance", SpanKind::kTweet}};
  auto it = kKinds.find(task_id);
  if (it == kKinds.end()) return true;
  return it->second == kind || kind == SpanKind::kGeneric;
}

CompletionRequest conversion_request(const SymbolSpan& span, const ConversionPrompt& prompt,
                                     const std::string& model) {
  CompletionRequest request;
  request.model = model;
  request.temperature = 0.0;
  request.messages.push_back({Role::kUser, prompt.render(span.raw_text)});
  return request;
}

Rendering convert_with_model(const SymbolSpan& span, const ConversionPrompt& prompt, Backend& backend,
                             const std::string& model) {
  if (!prompt_accepts(prompt.task_id, span.kind)) {
    throw Error(ErrorKind::kArgument, "prompt for task '" + prompt.task_id + "' cannot convert a " +
                                          to_string(span.kind) + " span");
  }
  std::string reply = complete(conversion_request(span, prompt, model), backend);
  Rendering rendering;
  rendering.span_id = span.id;
  rendering.text = std::string(text::trim(reply));
  rendering.method = ConversionMethod::kLlm;
  rendering.source_label = "llm:" + model + ":" + prompt.task_id;
  return rendering;
}

}  // namespace s2l::llm
