#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdlgen/ast.hpp"

namespace cdlgen {

struct TaskPort {
  std::string name;
  SignalKind kind = SignalKind::Real;
  std::string unit;
  std::string description;
};

struct TaskParam {
  std::string name;
  double value = 0;
  std::string unit;
  std::string description;
};

// Declared action direction: `output` moves with sign `sign` when
// `error_input` rises, all other inputs held.
struct Polarity {
  std::string output;
  std::string error_input;
  int sign = 1;
};

// One control task in the uniform goal / interface / sequence form.
struct ReferenceTask {
  std::string id;
  std::string title;
  std::string goal;
  std::vector<TaskPort> inputs;
  std::vector<TaskPort> outputs;
  std::vector<TaskParam> params;
  std::vector<std::string> rules;
  std::string oracle_id;
  std::optional<Polarity> polarity;
  // Input values for the two segments of the direction probe.
  std::map<std::string, double> probe_low;
  std::map<std::string, double> probe_high;

  const TaskParam* find_param(std::string_view name) const;
  const TaskPort* find_input(std::string_view name) const;
};

// key=value lines; repeated keys (input, output, param, rule) accumulate.
// Ports are `name|kind|unit|description`, params `name|value|unit|description`.
// Throws TaskFormatError, including for rule symbols that are never declared.
ReferenceTask parse_task(std::string_view text);

// "1".."5" load the shipped tasks; anything else is read as a task file.
ReferenceTask load_task(std::string_view id_or_path);

std::vector<std::string> shipped_task_ids();

// camelCase or underscored identifiers in the rules that are not inputs,
// outputs or params.
std::vector<std::string> undeclared_symbols(const ReferenceTask& task);

InterfaceSignature task_interface(const ReferenceTask& task);

}  // namespace cdlgen
