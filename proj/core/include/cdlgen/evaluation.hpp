#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdlgen/config.hpp"
#include "cdlgen/gateway.hpp"
#include "cdlgen/session.hpp"
#include "cdlgen/validator.hpp"

namespace cdlgen {

// Row labels of the review template, snake_cased. Path A scores a module
// whose behaviour is correct, path B one whose behaviour is not.
inline constexpr std::array<std::string_view, 5> kPathACriteria = {
    "library_appropriateness", "structure_modularity_readability", "interface_accuracy",
    "logic_simplicity_clarity", "robustness"};
inline constexpr std::array<std::string_view, 4> kPathBCriteria = {
    "simulation_syntax_validity", "semantic_correctness", "logical_soundness", "interface_appropriateness"};

enum class EffortBand { minor, moderate, major };
std::string_view to_string(EffortBand e);

struct Evaluator {
  enum class Kind { human, ai } kind = Kind::human;
  std::string name;  // reviewer name or model id
};

struct FaultNote {
  FaultClass fault;
  std::string note;
};

struct EvaluationRecord {
  std::string session_id;
  std::string task_id;
  Evaluator evaluator;
  std::optional<bool> gate;  // absent when an AI reply could not be parsed
  std::optional<std::vector<int>> path_a;
  std::optional<std::vector<int>> path_b;
  std::vector<FaultNote> faults;
  std::optional<EffortBand> effort;

  // Mean of the present path bits; nullopt when there are none.
  std::optional<double> score() const;
};

// Throws FormInvalid when the gate and the filled path disagree, a path has
// the wrong length or a bit is not 0/1.
void check_record(const EvaluationRecord& record);

// Plain-text form with [meta], [gate], [path_a], [path_b], [faults] and
// [effort] sections; fields left blank for the reviewer.
std::string human_eval_form(const GenerationSession& session);
std::string format_record(const EvaluationRecord& record);
// Throws FormInvalid.
EvaluationRecord ingest_human_eval(std::string_view form);

// "yes"/"no" from an evaluator reply (case-insensitive, surrounding
// punctuation allowed). Throws UnparseableVerdict.
bool parse_verdict(std::string_view reply);

struct AiEvaluation {
  EvaluationRecord record;
  TranscriptEntry call;
  std::optional<std::string> error;  // set when the reply was unparseable
};

// Renders the evaluator prompt for the session's final artifact and asks the
// gateway. An unparseable reply leaves the gate absent and sets `error`.
// Throws ConfigError when trace_based is asked for a session without a trace.
AiEvaluation ai_evaluate(const GenerationSession& session, EvalPathway pathway, Gateway& gateway,
                         const std::string& model_id, int max_tokens = 4096);

struct SessionOutcome {
  std::string session_id;
  std::string task_id;
  SessionStatus status = SessionStatus::failed_unrecoverable;
  int compile_iters = 0;
  int sim_iters = 0;
};

struct AgreementMatrix {
  // [human yes/no][ai yes/no]
  int yes_yes = 0, yes_no = 0, no_yes = 0, no_no = 0;
  int no_data = 0;  // sessions lacking either verdict
  std::vector<std::string> disagreements;  // session ids
};

struct AggregateReport {
  std::size_t sessions = 0;
  std::size_t successes = 0;  // converged and human gate yes (AI gate when no human record)
  double success_rate = 0;
  std::map<std::string, double> criterion_pass_rate;
  std::map<std::string, int> fault_counts;
  std::map<std::string, int> effort_counts;
  AgreementMatrix agreement;
  std::vector<std::string> rows;  // CSV rows, one per session
};

AggregateReport aggregate_report(const std::vector<EvaluationRecord>& records,
                                 const std::vector<SessionOutcome>& sessions);
std::string format_report(const AggregateReport& report);
std::string report_csv(const AggregateReport& report);

struct CostBenefitReport {
  double baseline_hours = 0;
  double assisted_hours = 0;
  double rate = 0;
  std::size_t modules = 1;
  double savings_per_module = 0;
  double savings_percent = 0;
  double portfolio_savings = 0;
};

CostBenefitReport cost_benefit(double baseline_hours, double assisted_hours, double rate, std::size_t modules);

// Reads every session.summary and *.form below `dir`.
struct ReportInputs {
  std::vector<EvaluationRecord> records;
  std::vector<SessionOutcome> sessions;
};
ReportInputs load_report_inputs(const std::filesystem::path& dir);

}  // namespace cdlgen
