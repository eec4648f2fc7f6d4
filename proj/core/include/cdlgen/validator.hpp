#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdlgen/ast.hpp"
#include "cdlgen/library_index.hpp"
#include "cdlgen/task.hpp"

namespace cdlgen {

enum class Severity { error, warning };

enum class FaultClass {
  duplicate_path,
  inverted_direction,
  unknown_class,
  broken_connection,
  version_drift,
  scope_violation,
  type_mismatch,
  interface_mismatch,
};

std::string_view to_string(Severity s);
std::string_view to_string(FaultClass f);
std::optional<FaultClass> fault_class_from(std::string_view name);

struct Diagnostic {
  std::string rule_id;  // R1..R7
  Severity severity = Severity::error;
  std::optional<FaultClass> fault_class;
  std::string location;  // "instance sub1", "connect 3", "output y", "port b.u1", "block"
  int line = 0;          // source line when known
  std::string message;
  std::optional<std::string> suggestion;  // R1 rename target

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct ValidationReport {
  std::vector<Diagnostic> diagnostics;
  std::vector<std::string> checked_rules;
  bool passed = true;

  std::size_t error_count() const;
  bool has(FaultClass f, Severity s = Severity::error) const;
};

// Standard-library classes accepted besides the CDL tree.
const std::vector<std::string>& standard_library_allowlist();

// Runs R1-R5, plus R6 and R7 when a task is given (R7 only when the task
// declares a polarity). Diagnostics are ordered by rule, then location.
ValidationReport validate(const ModelicaBlock& block, const LibraryIndex& index,
                          const ReferenceTask* task = nullptr);

// `severity<TAB>rule_id<TAB>fault_class<TAB>location<TAB>message` lines.
std::string format_diagnostics(const ValidationReport& report);

struct Injection {
  FaultClass fault;
  std::string target;       // instance or connect that was mutated
  std::string description;
};

struct SeededBlock {
  ModelicaBlock block;
  Injection record;
};

// Injects exactly one fault of the four taxonomy classes (unknown_class,
// broken_connection, duplicate_path, inverted_direction). Throws NotInjectable
// when the block offers no site for it or the class is not seedable.
SeededBlock seed_fault(const ModelicaBlock& block, FaultClass fault, std::uint64_t rng_seed,
                       const LibraryIndex* index = nullptr);

}  // namespace cdlgen
