#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cdlgen/library_index.hpp"
#include "cdlgen/task.hpp"

namespace cdlgen {

struct PromptTemplate {
  std::string name;
  std::string role_id;  // code_generator, control_expert, iteration_evaluator, basic_logic, evaluator
  std::string system_text;
  std::string user_template;
  std::vector<std::string> placeholders;
};

struct PromptBundle {
  std::string role_id;
  std::string system_text;
  std::string user_text;
  std::map<std::string, std::string> substitutions;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

// Template file: `#prompt-template role=<id> placeholders=a,b`, then an
// `@system` line, the system text, an `@user` line and the user template.
// Throws InvalidTemplate when the header and the `{name}` uses disagree.
PromptTemplate parse_template(std::string_view name, std::string_view text);

// Shipped templates by name (code_generator, control_expert, iteration,
// evaluation_trace, evaluation_code, basic_<op>_<a|b>).
PromptTemplate load_template(std::string_view name);
std::vector<std::string> template_names();

// `{name}` occurrences whose name is a Modelica identifier, in order of
// first appearance.
std::vector<std::string> placeholders_in(std::string_view text);

// Byte-exact substitution. Throws MissingPlaceholder, then ExtraPlaceholder.
PromptBundle render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values);

enum class LogicBlock { And, Or, Not, Switch };
enum class PromptVariant { a_minimal, b_detailed };

PromptBundle basic_logic_prompt(LogicBlock block, PromptVariant variant);

// "Please <goal>. The inputs are ... The outputs are ... The parameters are
// ... The control sequence is:" followed by numbered rules.
std::string control_task_prompt(const ReferenceTask& task);

// Value for {txt}: sorted, de-duplicated unqualified class names, one per line.
std::string module_name_list(const LibraryIndex& index);

// Value for {modules}: fully qualified names joined with ", ".
std::string module_list(const std::vector<std::string>& fqns);

}  // namespace cdlgen
