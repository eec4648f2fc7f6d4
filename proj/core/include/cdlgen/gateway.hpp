#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdlgen {

struct ChatRequest {
  std::string model_id;
  std::string system_text;
  std::string user_text;
  int max_tokens = 4096;
  double temperature = 0;

  // SHA-256 over the length-prefixed model id, system text and user text.
  std::string key() const;
};

struct ChatResponse {
  std::string text;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  double latency = 0;  // seconds
  std::string provider;
  std::string model_id;
  bool from_replay = false;
  bool estimated = false;  // token counts are ceil(chars/4)
};

// ceil(chars / 4)
long long estimate_tokens(std::string_view text);

// Append-only record store keyed by request key. Safe for concurrent use.
class Cassette {
 public:
  explicit Cassette(std::string name = "cassette") : name_(std::move(name)) {}

  // Throws ConfigError on a malformed file.
  static Cassette parse(std::string_view text, std::string name = "cassette");
  static Cassette load(const std::filesystem::path& path);

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const;
  std::optional<ChatResponse> find(const std::string& key) const;
  // False when the key is already present.
  bool add(const std::string& key, const ChatResponse& response);
  std::vector<std::string> keys() const;

  std::string format() const;
  // Format of one record, for incremental appends.
  static std::string format_record(const std::string& key, const ChatResponse& response);

 private:
  std::string name_;
  std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
  std::vector<std::pair<std::string, ChatResponse>> records_;
  std::map<std::string, std::size_t> by_key_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  virtual ChatResponse send(const ChatRequest& request) = 0;
};

// Declarative HTTP chat-completion adapter.
struct ProviderConfig {
  std::string name = "openai";
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model_id;
  std::string auth_env_var = "OPENAI_API_KEY";  // value read at call time only
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  double timeout_s = 120;
  int max_tokens = 4096;
  // openai: system message in `messages`; anthropic: top-level `system`.
  std::string request_style = "openai";
  // Dotted paths into the reply JSON; numeric segments index arrays.
  std::string text_path = "choices.0.message.content";
  std::string prompt_tokens_path = "usage.prompt_tokens";
  std::string completion_tokens_path = "usage.completion_tokens";
  std::map<std::string, std::string> extra_headers;
};

// Provider presets: openai, anthropic, ollama.
ProviderConfig provider_preset(std::string_view name);

class HttpProvider : public Provider {
 public:
  explicit HttpProvider(ProviderConfig config) : config_(std::move(config)) {}
  std::string name() const override { return config_.name; }
  ChatResponse send(const ChatRequest& request) override;

  // Request body and reply parsing, exposed for tests.
  std::string request_body(const ChatRequest& request) const;
  ChatResponse parse_reply(std::string_view body) const;

 private:
  ProviderConfig config_;
};

// Replies with queued texts in order; counts calls. Used as a test stub and
// for offline dry runs.
class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(std::vector<std::string> replies, std::string name = "scripted")
      : replies_(std::move(replies)), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  ChatResponse send(const ChatRequest& request) override;
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> replies_;
  std::string name_;
  std::size_t next_ = 0;
};

enum class GatewayMode { live, replay, record };
std::string_view to_string(GatewayMode m);
std::optional<GatewayMode> gateway_mode_from(std::string_view name);

class Gateway {
 public:
  static Gateway live(std::shared_ptr<Provider> provider);
  // Replay never holds a provider, so it cannot reach the network.
  static Gateway replay(std::shared_ptr<const Cassette> cassette);
  // New records are appended to `append_to` when given.
  static Gateway record(std::shared_ptr<Provider> provider, std::shared_ptr<Cassette> cassette,
                        std::optional<std::filesystem::path> append_to = std::nullopt);

  GatewayMode mode() const noexcept { return mode_; }
  bool has_provider() const noexcept { return provider_ != nullptr; }

  // Throws ReplayMiss, ProviderError or Timeout.
  ChatResponse complete(const ChatRequest& request);

  std::size_t outbound_calls() const;

 private:
  Gateway() = default;

  GatewayMode mode_ = GatewayMode::replay;
  std::shared_ptr<Provider> provider_;
  std::shared_ptr<const Cassette> replay_;
  std::shared_ptr<Cassette> record_;
  std::optional<std::filesystem::path> append_to_;
  std::shared_ptr<std::mutex> file_mu_ = std::make_shared<std::mutex>();
  std::shared_ptr<std::atomic<std::size_t>> outbound_ = std::make_shared<std::atomic<std::size_t>>(0);
};

// Fenced block contents joined by newlines, or the trimmed text when there is
// no fence. Throws EmptyCode for a whitespace-only result.
std::string extract_code(std::string_view response_text);

struct ModelMetrics {
  std::size_t calls = 0;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  double mean_prompt_tokens = 0;
  double mean_completion_tokens = 0;
  double mean_latency = 0;
  double min_latency = 0;
  double max_latency = 0;
  std::size_t estimated_calls = 0;
  std::size_t replayed_calls = 0;
};

// Keyed by model id.
std::map<std::string, ModelMetrics> metrics_summary(const std::vector<ChatResponse>& responses);

}  // namespace cdlgen
