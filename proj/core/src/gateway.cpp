#include "cdlgen/gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <json.hpp>

#include "cdlgen/error.hpp"
#include "util.hpp"

namespace cdlgen {

using nlohmann::json;

std::string ChatRequest::key() const {
  std::string buf;
  for (const auto* field : {&model_id, &system_text, &user_text}) {
    buf += std::to_string(field->size());
    buf += ':';
    buf += *field;
  }
  return util::sha256_hex(buf);
}

long long estimate_tokens(std::string_view text) { return static_cast<long long>((text.size() + 3) / 4); }

// ---------------------------------------------------------------------------
// cassette

Cassette Cassette::parse(std::string_view text, std::string name) {
  Cassette c(std::move(name));
  std::size_t pos = 0;
  int record = 0;
  auto line = [&](const char* what) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos)
      throw ConfigError("cassette " + c.name_ + ": record " + std::to_string(record) + " truncated in " + what);
    auto out = text.substr(pos, nl - pos);
    pos = nl + 1;
    return out;
  };
  while (pos < text.size()) {
    ++record;
    std::string key(line("key"));
    auto size = util::parse_int(line("size"));
    if (!size || *size < 0 || pos + static_cast<std::size_t>(*size) + 1 > text.size())
      throw ConfigError("cassette " + c.name_ + ": record " + std::to_string(record) + " has a bad text size");
    ChatResponse r;
    r.text = std::string(text.substr(pos, static_cast<std::size_t>(*size)));
    pos += static_cast<std::size_t>(*size);
    if (text[pos] != '\n') throw ConfigError("cassette " + c.name_ + ": record " + std::to_string(record) + " text overruns");
    ++pos;
    auto fields = util::split(line("usage"), '\t');
    std::optional<long long> pt, ct;
    std::optional<double> lat;
    if (fields.size() == 3) {
      pt = util::parse_int(fields[0]);
      ct = util::parse_int(fields[1]);
      lat = util::parse_double(fields[2]);
    }
    if (!pt || !ct || !lat || *pt < 0 || *ct < 0 || *lat < 0)
      throw ConfigError("cassette " + c.name_ + ": record " + std::to_string(record) + " has bad usage fields");
    r.prompt_tokens = *pt;
    r.completion_tokens = *ct;
    r.latency = *lat;
    r.provider = "cassette:" + c.name_;
    r.from_replay = true;
    if (!c.add(key, r)) throw ConfigError("cassette " + c.name_ + ": duplicate key " + key);
  }
  return c;
}

Cassette Cassette::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("cassette not found: " + path.string());
  return parse(util::read_file(path), path.stem().string());
}

std::size_t Cassette::size() const {
  std::lock_guard lock(*mu_);
  return records_.size();
}

std::optional<ChatResponse> Cassette::find(const std::string& key) const {
  std::lock_guard lock(*mu_);
  auto it = by_key_.find(key);
  if (it == by_key_.end()) return std::nullopt;
  return records_[it->second].second;
}

bool Cassette::add(const std::string& key, const ChatResponse& response) {
  std::lock_guard lock(*mu_);
  if (by_key_.count(key)) return false;
  by_key_[key] = records_.size();
  records_.emplace_back(key, response);
  return true;
}

std::vector<std::string> Cassette::keys() const {
  std::lock_guard lock(*mu_);
  std::vector<std::string> out;
  for (const auto& r : records_) out.push_back(r.first);
  return out;
}

std::string Cassette::format_record(const std::string& key, const ChatResponse& r) {
  return key + "\n" + std::to_string(r.text.size()) + "\n" + r.text + "\n" + std::to_string(r.prompt_tokens) + "\t" +
         std::to_string(r.completion_tokens) + "\t" + util::format_real(r.latency) + "\n";
}

std::string Cassette::format() const {
  std::lock_guard lock(*mu_);
  std::string out;
  for (const auto& [k, r] : records_) out += format_record(k, r);
  return out;
}

// ---------------------------------------------------------------------------
// providers

ProviderConfig provider_preset(std::string_view name) {
  ProviderConfig c;
  if (name == "openai") return c;
  if (name == "anthropic") {
    c.name = "anthropic";
    c.base_url = "https://api.anthropic.com";
    c.path = "/v1/messages";
    c.auth_env_var = "ANTHROPIC_API_KEY";
    c.auth_header = "x-api-key";
    c.auth_prefix = "";
    c.request_style = "anthropic";
    c.text_path = "content.0.text";
    c.prompt_tokens_path = "usage.input_tokens";
    c.completion_tokens_path = "usage.output_tokens";
    c.extra_headers["anthropic-version"] = "2023-06-01";
    return c;
  }
  if (name == "ollama") {
    c.name = "ollama";
    c.base_url = "http://localhost:11434";
    c.path = "/api/chat";
    c.auth_env_var = "";
    c.auth_header = "";
    c.auth_prefix = "";
    c.text_path = "message.content";
    c.prompt_tokens_path = "prompt_eval_count";
    c.completion_tokens_path = "eval_count";
    return c;
  }
  throw ConfigError("unknown provider preset '" + std::string(name) + "'");
}

namespace {

const json* walk(const json& root, const std::string& dotted) {
  const json* cur = &root;
  for (const auto& seg : util::split(dotted, '.')) {
    if (cur->is_array()) {
      auto i = util::parse_int(seg);
      if (!i || *i < 0 || static_cast<std::size_t>(*i) >= cur->size()) return nullptr;
      cur = &(*cur)[static_cast<std::size_t>(*i)];
    } else if (cur->is_object()) {
      auto it = cur->find(seg);
      if (it == cur->end()) return nullptr;
      cur = &*it;
    } else {
      return nullptr;
    }
  }
  return cur;
}

std::string excerpt(std::string_view body) {
  constexpr std::size_t kMax = 200;
  return std::string(body.substr(0, kMax)) + (body.size() > kMax ? "..." : "");
}

}  // namespace

std::string HttpProvider::request_body(const ChatRequest& req) const {
  json body;
  body["model"] = req.model_id.empty() ? config_.model_id : req.model_id;
  body["temperature"] = req.temperature;
  if (config_.request_style == "anthropic") {
    body["max_tokens"] = req.max_tokens;
    body["system"] = req.system_text;
    body["messages"] = json::array({{{"role", "user"}, {"content", req.user_text}}});
  } else {
    if (config_.name == "ollama") {
      body["stream"] = false;
    } else {
      body["max_tokens"] = req.max_tokens;
    }
    body["messages"] = json::array();
    if (!req.system_text.empty()) body["messages"].push_back({{"role", "system"}, {"content", req.system_text}});
    body["messages"].push_back({{"role", "user"}, {"content", req.user_text}});
  }
  return body.dump();
}

ChatResponse HttpProvider::parse_reply(std::string_view body) const {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw ProviderError(200, "reply is not JSON: " + excerpt(body));
  const json* text = walk(j, config_.text_path);
  if (!text || !text->is_string()) throw ProviderError(200, "reply has no text at " + config_.text_path);
  ChatResponse r;
  r.text = text->get<std::string>();
  r.provider = config_.name;
  const json* pt = walk(j, config_.prompt_tokens_path);
  const json* ct = walk(j, config_.completion_tokens_path);
  if (pt && ct && pt->is_number_integer() && ct->is_number_integer()) {
    r.prompt_tokens = pt->get<long long>();
    r.completion_tokens = ct->get<long long>();
  } else {
    r.estimated = true;
    r.completion_tokens = estimate_tokens(r.text);
  }
  return r;
}

ChatResponse HttpProvider::send(const ChatRequest& req) {
  httplib::Client cli(config_.base_url);
  auto secs = static_cast<time_t>(config_.timeout_s);
  auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!config_.auth_env_var.empty()) {
    const char* secret = std::getenv(config_.auth_env_var.c_str());
    if (!secret || !*secret) throw ConfigError("environment variable " + config_.auth_env_var + " is not set");
    headers.emplace(config_.auth_header, config_.auth_prefix + secret);
  }
  for (const auto& [k, v] : config_.extra_headers) headers.emplace(k, v);

  auto start = std::chrono::steady_clock::now();
  auto res = cli.Post(config_.path, headers, request_body(req), "application/json");
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!res) {
    auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && elapsed >= config_.timeout_s * 0.95))
      throw Timeout(config_.timeout_s);
    throw ProviderError(0, httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) throw ProviderError(res->status, excerpt(res->body));
  ChatResponse r = parse_reply(res->body);
  if (r.estimated) r.prompt_tokens = estimate_tokens(req.system_text) + estimate_tokens(req.user_text);
  r.latency = elapsed;
  return r;
}

ChatResponse ScriptedProvider::send(const ChatRequest& req) {
  std::lock_guard lock(mu_);
  if (next_ >= replies_.size()) throw ProviderError(0, "scripted provider has no reply left");
  ChatResponse r;
  r.text = replies_[next_++];
  r.provider = name_;
  r.prompt_tokens = estimate_tokens(req.system_text) + estimate_tokens(req.user_text);
  r.completion_tokens = estimate_tokens(r.text);
  r.estimated = true;
  return r;
}

std::size_t ScriptedProvider::calls() const {
  std::lock_guard lock(mu_);
  return next_;
}

// ---------------------------------------------------------------------------
// gateway

std::string_view to_string(GatewayMode m) {
  switch (m) {
    case GatewayMode::live: return "live";
    case GatewayMode::replay: return "replay";
    case GatewayMode::record: return "record";
  }
  return "?";
}

std::optional<GatewayMode> gateway_mode_from(std::string_view name) {
  for (auto m : {GatewayMode::live, GatewayMode::replay, GatewayMode::record})
    if (to_string(m) == name) return m;
  return std::nullopt;
}

Gateway Gateway::live(std::shared_ptr<Provider> provider) {
  Gateway g;
  g.mode_ = GatewayMode::live;
  g.provider_ = std::move(provider);
  return g;
}

Gateway Gateway::replay(std::shared_ptr<const Cassette> cassette) {
  Gateway g;
  g.mode_ = GatewayMode::replay;
  g.replay_ = std::move(cassette);
  return g;
}

Gateway Gateway::record(std::shared_ptr<Provider> provider, std::shared_ptr<Cassette> cassette,
                        std::optional<std::filesystem::path> append_to) {
  Gateway g;
  g.mode_ = GatewayMode::record;
  g.provider_ = std::move(provider);
  g.record_ = std::move(cassette);
  g.append_to_ = std::move(append_to);
  return g;
}

std::size_t Gateway::outbound_calls() const { return *outbound_; }

ChatResponse Gateway::complete(const ChatRequest& req) {
  const std::string key = req.key();
  auto stamp = [&](ChatResponse r) {
    r.model_id = req.model_id;
    return r;
  };
  switch (mode_) {
    case GatewayMode::replay: {
      auto hit = replay_ ? replay_->find(key) : std::nullopt;
      if (!hit) throw ReplayMiss(key);
      return stamp(*hit);
    }
    case GatewayMode::record: {
      if (auto hit = record_->find(key)) {
        hit->from_replay = true;
        return stamp(*hit);
      }
      ++*outbound_;
      ChatResponse r = provider_->send(req);
      if (record_->add(key, r) && append_to_) {
        std::lock_guard lock(*file_mu_);
        std::ofstream out(*append_to_, std::ios::binary | std::ios::app);
        out << Cassette::format_record(key, r);
        if (!out) throw ConfigError("cannot append to cassette " + append_to_->string());
      }
      return stamp(r);
    }
    case GatewayMode::live:
      ++*outbound_;
      return stamp(provider_->send(req));
  }
  throw Error("unreachable gateway mode");
}

// ---------------------------------------------------------------------------

std::string extract_code(std::string_view text) {
  std::vector<std::string> blocks;
  std::size_t pos = 0;
  while (true) {
    auto open = text.find("```", pos);
    if (open == std::string_view::npos) break;
    auto body = text.find('\n', open);
    if (body == std::string_view::npos) break;
    ++body;
    auto close = text.find("```", body);
    if (close == std::string_view::npos) {
      blocks.emplace_back(text.substr(body));
      break;
    }
    blocks.emplace_back(text.substr(body, close - body));
    pos = close + 3;
  }
  std::string out;
  if (blocks.empty()) {
    out = util::trim(text);
  } else {
    for (auto& b : blocks) {
      while (!b.empty() && (b.back() == '\n' || b.back() == '\r')) b.pop_back();
      if (!out.empty()) out += '\n';
      out += b;
    }
  }
  if (util::trim(out).empty()) throw EmptyCode();
  return out;
}

std::map<std::string, ModelMetrics> metrics_summary(const std::vector<ChatResponse>& responses) {
  std::map<std::string, ModelMetrics> out;
  for (const auto& r : responses) {
    auto& m = out[r.model_id];
    m.min_latency = m.calls == 0 ? r.latency : std::min(m.min_latency, r.latency);
    m.max_latency = m.calls == 0 ? r.latency : std::max(m.max_latency, r.latency);
    ++m.calls;
    m.prompt_tokens += r.prompt_tokens;
    m.completion_tokens += r.completion_tokens;
    m.mean_latency += r.latency;
    m.estimated_calls += r.estimated ? 1 : 0;
    m.replayed_calls += r.from_replay ? 1 : 0;
  }
  for (auto& [id, m] : out) {
    auto n = static_cast<double>(m.calls);
    m.mean_latency /= n;
    m.mean_prompt_tokens = static_cast<double>(m.prompt_tokens) / n;
    m.mean_completion_tokens = static_cast<double>(m.completion_tokens) / n;
  }
  return out;
}

}  // namespace cdlgen
