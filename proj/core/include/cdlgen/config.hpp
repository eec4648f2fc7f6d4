#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "cdlgen/gateway.hpp"

namespace cdlgen {

enum class CompileBackend { builtin_validator, external_toolchain };
enum class EvalPathway { trace_based, code_based };

std::string_view to_string(CompileBackend b);
std::string_view to_string(EvalPathway p);

struct ToolchainConfig {
  std::string command;                          // e.g. omc
  std::filesystem::path script_template_path;  // {source_path} and {model_name} are substituted
  double timeout_s = 120;
};

struct PipelineConfig {
  int max_compile_iters = 3;
  int max_sim_iters = 2;
  int max_eval_iters = 1;
  bool ai_eval = false;
  EvalPathway eval_pathway = EvalPathway::trace_based;
  CompileBackend compile_backend = CompileBackend::builtin_validator;
  bool behavioral_repair = false;
  bool fuzzy_selection = false;  // resolve selector names by the fuzzy baseline
  double step_size = 10;
  double horizon = 3600;
};

struct Config {
  std::filesystem::path base_dir;  // directory of the config file
  std::filesystem::path library_root;
  std::string library_version = "10.1.x";
  std::filesystem::path index_path;
  std::filesystem::path rename_map;
  ProviderConfig provider;
  PipelineConfig pipeline;
  ToolchainConfig toolchain;
  std::filesystem::path output_dir = "sessions";
  GatewayMode mode = GatewayMode::replay;
  std::optional<std::filesystem::path> cassette;

  // Replay and record need a cassette; live needs the auth variable set.
  // Throws ConfigError.
  void check() const;
};

// `[section]` headers and `key=value` lines; `#` starts a comment line.
// Relative paths resolve against `base_dir`. Unknown keys and anything that
// looks like an inline secret are ConfigErrors.
Config parse_config(std::string_view text, const std::filesystem::path& base_dir);
Config load_config(const std::filesystem::path& path);

// Canonical key=value dump with paths relative to base_dir. Holds the name of
// the auth variable, never its value.
std::string format_config(const Config& config);

}  // namespace cdlgen
