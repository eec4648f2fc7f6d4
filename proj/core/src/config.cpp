#include "cdlgen/config.hpp"

#include <cstdlib>
#include <functional>
#include <map>

#include "cdlgen/error.hpp"
#include "util.hpp"

namespace cdlgen {

std::string_view to_string(CompileBackend b) {
  return b == CompileBackend::builtin_validator ? "builtin_validator" : "external_toolchain";
}

std::string_view to_string(EvalPathway p) { return p == EvalPathway::trace_based ? "trace_based" : "code_based"; }

namespace {

bool looks_secret(std::string_view key) {
  auto k = util::to_lower(key);
  for (const char* bad : {"api_key", "apikey", "secret", "token_value", "password"})
    if (k.find(bad) != std::string::npos) return true;
  return k == "key" || k == "token";
}

int to_int(const std::string& where, const std::string& v, int lo) {
  auto n = util::parse_int(v);
  if (!n || *n < lo) throw ConfigError(where + ": expected an integer >= " + std::to_string(lo) + ", got '" + v + "'");
  return static_cast<int>(*n);
}

double to_positive(const std::string& where, const std::string& v) {
  auto d = util::parse_double(v);
  if (!d || *d <= 0) throw ConfigError(where + ": expected a positive number, got '" + v + "'");
  return *d;
}

bool to_flag(const std::string& where, const std::string& v) {
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(where + ": expected on/off, got '" + v + "'");
}

std::string rel(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty()) return "";
  auto r = p.lexically_relative(base);
  return (r.empty() ? p : r).generic_string();
}

}  // namespace

void Config::check() const {
  if (pipeline.max_compile_iters < 1 || pipeline.max_sim_iters < 1 || pipeline.max_eval_iters < 1)
    throw ConfigError("loop maxima must be at least 1");
  if ((mode == GatewayMode::replay || mode == GatewayMode::record) && !cassette)
    throw ConfigError(std::string(to_string(mode)) + " mode needs [gateway] cassette");
  if (mode == GatewayMode::replay && !std::filesystem::exists(*cassette))
    throw ConfigError("cassette not found: " + cassette->string());
  if (mode != GatewayMode::replay && !provider.auth_env_var.empty()) {
    const char* v = std::getenv(provider.auth_env_var.c_str());
    if (!v || !*v) throw ConfigError("environment variable " + provider.auth_env_var + " is not set");
  }
  if (pipeline.compile_backend == CompileBackend::external_toolchain && toolchain.command.empty())
    throw ConfigError("external_toolchain backend needs [toolchain] command");
}

Config parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  Config c;
  c.base_dir = base_dir;
  auto path = [&](const std::string& v) { return (base_dir / v).lexically_normal(); };

  using Setter = std::function<void(const std::string& where, const std::string& v)>;
  std::map<std::string, Setter> keys = {
      {"library.root", [&](auto&, auto& v) { c.library_root = path(v); }},
      {"library.version", [&](auto&, auto& v) { c.library_version = v; }},
      {"library.index", [&](auto&, auto& v) { c.index_path = path(v); }},
      {"library.renames", [&](auto&, auto& v) { c.rename_map = path(v); }},
      {"provider.preset",
       [&](auto&, auto& v) {
         auto model = c.provider.model_id;
         c.provider = provider_preset(v);
         c.provider.model_id = model;
       }},
      {"provider.name", [&](auto&, auto& v) { c.provider.name = v; }},
      {"provider.base_url", [&](auto&, auto& v) { c.provider.base_url = v; }},
      {"provider.path", [&](auto&, auto& v) { c.provider.path = v; }},
      {"provider.model_id", [&](auto&, auto& v) { c.provider.model_id = v; }},
      {"provider.auth_env_var", [&](auto&, auto& v) { c.provider.auth_env_var = v; }},
      {"provider.auth_header", [&](auto&, auto& v) { c.provider.auth_header = v; }},
      {"provider.auth_prefix", [&](auto&, auto& v) { c.provider.auth_prefix = v; }},
      {"provider.timeout_s", [&](auto& w, auto& v) { c.provider.timeout_s = to_positive(w, v); }},
      {"provider.max_tokens", [&](auto& w, auto& v) { c.provider.max_tokens = to_int(w, v, 1); }},
      {"provider.request_style", [&](auto&, auto& v) { c.provider.request_style = v; }},
      {"provider.text_path", [&](auto&, auto& v) { c.provider.text_path = v; }},
      {"provider.prompt_tokens_path", [&](auto&, auto& v) { c.provider.prompt_tokens_path = v; }},
      {"provider.completion_tokens_path", [&](auto&, auto& v) { c.provider.completion_tokens_path = v; }},
      {"pipeline.max_compile_iters", [&](auto& w, auto& v) { c.pipeline.max_compile_iters = to_int(w, v, 1); }},
      {"pipeline.max_sim_iters", [&](auto& w, auto& v) { c.pipeline.max_sim_iters = to_int(w, v, 1); }},
      {"pipeline.max_eval_iters", [&](auto& w, auto& v) { c.pipeline.max_eval_iters = to_int(w, v, 1); }},
      {"pipeline.ai_eval", [&](auto& w, auto& v) { c.pipeline.ai_eval = to_flag(w, v); }},
      {"pipeline.eval_pathway",
       [&](auto& w, auto& v) {
         if (v == "trace_based")
           c.pipeline.eval_pathway = EvalPathway::trace_based;
         else if (v == "code_based")
           c.pipeline.eval_pathway = EvalPathway::code_based;
         else
           throw ConfigError(w + ": expected trace_based or code_based");
       }},
      {"pipeline.compile_backend",
       [&](auto& w, auto& v) {
         if (v == "builtin_validator")
           c.pipeline.compile_backend = CompileBackend::builtin_validator;
         else if (v == "external_toolchain")
           c.pipeline.compile_backend = CompileBackend::external_toolchain;
         else
           throw ConfigError(w + ": expected builtin_validator or external_toolchain");
       }},
      {"pipeline.behavioral_repair", [&](auto& w, auto& v) { c.pipeline.behavioral_repair = to_flag(w, v); }},
      {"pipeline.selection",
       [&](auto& w, auto& v) {
         if (v != "hard_rule" && v != "fuzzy") throw ConfigError(w + ": expected hard_rule or fuzzy");
         c.pipeline.fuzzy_selection = v == "fuzzy";
       }},
      {"pipeline.step_size", [&](auto& w, auto& v) { c.pipeline.step_size = to_positive(w, v); }},
      {"pipeline.horizon", [&](auto& w, auto& v) { c.pipeline.horizon = to_positive(w, v); }},
      {"gateway.mode",
       [&](auto& w, auto& v) {
         auto m = gateway_mode_from(v);
         if (!m) throw ConfigError(w + ": expected live, replay or record");
         c.mode = *m;
       }},
      {"gateway.cassette", [&](auto&, auto& v) { c.cassette = path(v); }},
      {"toolchain.command", [&](auto&, auto& v) { c.toolchain.command = v; }},
      {"toolchain.script_template_path", [&](auto&, auto& v) { c.toolchain.script_template_path = path(v); }},
      {"toolchain.timeout_s", [&](auto& w, auto& v) { c.toolchain.timeout_s = to_positive(w, v); }},
      {"output.dir", [&](auto&, auto& v) { c.output_dir = path(v); }},
  };

  c.output_dir = path("sessions");
  std::string section;
  int lineno = 0;
  for (const auto& raw : util::split(text, '\n')) {
    ++lineno;
    auto line = util::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    std::string where = "config line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = util::trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
    auto key = util::trim(line.substr(0, eq));
    auto value = util::trim(line.substr(eq + 1));
    if (looks_secret(key))
      throw ConfigError(where + ": secrets are read from environment variables only; set auth_env_var instead of " + key);
    auto it = keys.find(section + "." + key);
    if (it == keys.end()) throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
    it->second(where + " (" + key + ")", value);
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config not found: " + path.string());
  auto abs = std::filesystem::absolute(path);
  return parse_config(util::read_file(abs), abs.parent_path());
}

std::string format_config(const Config& c) {
  const auto& b = c.base_dir;
  const auto& p = c.pipeline;
  std::string out;
  auto kv = [&](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
  kv("library.version", c.library_version);
  kv("library.index", rel(c.index_path, b));
  kv("library.renames", rel(c.rename_map, b));
  kv("provider.name", c.provider.name);
  kv("provider.model_id", c.provider.model_id);
  kv("provider.auth_env_var", c.provider.auth_env_var);
  kv("provider.max_tokens", std::to_string(c.provider.max_tokens));
  kv("gateway.mode", std::string(to_string(c.mode)));
  kv("gateway.cassette", c.cassette ? rel(*c.cassette, b) : "");
  kv("pipeline.max_compile_iters", std::to_string(p.max_compile_iters));
  kv("pipeline.max_sim_iters", std::to_string(p.max_sim_iters));
  kv("pipeline.max_eval_iters", std::to_string(p.max_eval_iters));
  kv("pipeline.ai_eval", p.ai_eval ? "on" : "off");
  kv("pipeline.eval_pathway", std::string(to_string(p.eval_pathway)));
  kv("pipeline.compile_backend", std::string(to_string(p.compile_backend)));
  kv("pipeline.behavioral_repair", p.behavioral_repair ? "on" : "off");
  kv("pipeline.selection", p.fuzzy_selection ? "fuzzy" : "hard_rule");
  kv("pipeline.step_size", util::format_real(p.step_size));
  kv("pipeline.horizon", util::format_real(p.horizon));
  return out;
}

}  // namespace cdlgen
