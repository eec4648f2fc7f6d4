#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cdlgen/ast.hpp"
#include "cdlgen/interpreter.hpp"
#include "cdlgen/library_index.hpp"
#include "cdlgen/task.hpp"

namespace cdlgen {

// Returns a description of the first violation, or nullopt when it holds.
using TraceCheck = std::function<std::optional<std::string>(const SimulationTrace&)>;

struct OraclePredicate {
  std::string name;
  std::vector<int> rules;  // 1-based task rule numbers it covers
  TraceCheck check;
};

struct OracleOptions {
  std::uint64_t seed = 1;
  // Hysteresis assumed on the Task 4 temperature tiers; probe values keep
  // clear of it.
  double temperature_hysteresis = 0.1;
};

struct ConformanceOracle {
  std::string id;  // O1..O5
  double step_size = 10;
  double horizon = 3600;
  SimulationTrace probe;  // inputs only
  std::vector<OraclePredicate> predicates;
};

// Builds the shipped oracle named by task.oracle_id from the task's params.
// Throws ConfigError for an unknown oracle id.
ConformanceOracle make_oracle(const ReferenceTask& task, const OracleOptions& options = {});

struct PredicateVerdict {
  std::string name;
  bool holds = false;
  std::string detail;

  friend bool operator==(const PredicateVerdict&, const PredicateVerdict&) = default;
};

struct ConformanceResult {
  bool passed = false;
  std::vector<PredicateVerdict> verdicts;
  SimulationTrace trace;
};

// Elaboration and simulation errors pass through.
ConformanceResult check_conformance(const ConformanceOracle& oracle, const ModelicaBlock& block,
                                    const LibraryIndex& index);

// Hand-stepped Task 4 reference: expected (yChiWatResReq, yChiPlaReq) per step
// for the given inputs.
struct PlantRequestParams {
  double tdif3 = 3, tdif2 = 2, delay = 120;
  double val_high = 0.95, val_low = 0.85, val_plant = 0.10;
  double hysteresis = 0.1;
};

std::pair<std::vector<long long>, std::vector<long long>> plant_requests_oracle(
    const std::vector<double>& tsup, const std::vector<double>& tset, const std::vector<double>& valve,
    double step_size, const PlantRequestParams& p = {});

}  // namespace cdlgen
