#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdlgen/gateway.hpp"
#include "cdlgen/interpreter.hpp"
#include "cdlgen/oracle.hpp"
#include "cdlgen/task.hpp"
#include "cdlgen/validator.hpp"

namespace cdlgen {

enum class SessionStatus { converged, failed_max_iterations, failed_unrecoverable };
std::string_view to_string(SessionStatus s);
std::optional<SessionStatus> session_status_from(std::string_view name);

enum class Provenance { hard_rule, fuzzy };
std::string_view to_string(Provenance p);

struct SelectedModule {
  std::string fqn;
  Provenance provenance = Provenance::hard_rule;
  std::string requested;  // name as written by the selector
};

struct TranscriptEntry {
  std::string role_id;
  ChatRequest request;
  ChatResponse response;
};

enum class Gate { compile, simulate };

struct Artifact {
  int iteration = 0;  // 1-based
  std::string source;
  ValidationReport report;
  bool compiled = false;
  std::optional<SimulationTrace> trace;
  std::optional<bool> simulated;  // absent when the simulate gate never ran
  std::string error_log;          // what was sent back for repair, if anything
};

struct LoopCounters {
  int compile = 0;
  int simulate = 0;
  int evaluate = 0;
};

struct GenerationSession {
  std::string session_id;
  ReferenceTask task;
  std::string config_snapshot;
  std::vector<SelectedModule> selected_modules;
  std::vector<TranscriptEntry> transcript;
  std::vector<std::string> notes;
  std::vector<Artifact> artifacts;
  SessionStatus status = SessionStatus::failed_unrecoverable;
  std::string cause;
  LoopCounters counters;
  std::optional<ConformanceResult> conformance;
  std::optional<std::string> ai_verdict;  // "yes" / "no" from the evaluator role

  const Artifact* final_artifact() const { return artifacts.empty() ? nullptr : &artifacts.back(); }
  std::vector<ChatResponse> responses() const;
};

}  // namespace cdlgen
