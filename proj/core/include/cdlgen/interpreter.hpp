#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cdlgen/ast.hpp"
#include "cdlgen/library_index.hpp"

namespace cdlgen {

// Real, Boolean or Integer sample.
using SignalValue = std::variant<double, bool, long long>;

SignalKind kind_of(const SignalValue& v);
std::string format_value(const SignalValue& v);  // 9 significant digits, 0/1, integer
double as_double(const SignalValue& v);

using Series = std::vector<SignalValue>;

struct SimulationTrace {
  double step_size = 10;
  double horizon = 0;
  std::vector<std::string> ports;  // column order
  std::map<std::string, Series, std::less<>> series;

  // floor(horizon / step_size) + 1
  std::size_t steps() const;
  double time(std::size_t n) const { return static_cast<double>(n) * step_size; }
  void add(const std::string& port, Series values);
  bool has(std::string_view port) const { return series.find(port) != series.end(); }
};

std::size_t step_count(double step_size, double horizon);

// Throws UnknownPort.
const Series& probe(const SimulationTrace& trace, std::string_view port);

// ---------------------------------------------------------------------------
// behaviour registry

struct PortDef {
  std::string name;
  SignalKind kind;
};

// Resolved parameter values of one instance.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  // Throws ElaborationError when absent or not numeric.
  double number(std::string_view name) const;
  bool boolean(std::string_view name) const;
  const std::string& text(std::string_view name) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct StepInfo {
  std::size_t n = 0;
  double dt = 1;
};

// One running block. Values are exchanged as doubles (Booleans 0/1).
class BlockState {
 public:
  virtual ~BlockState() = default;
  // Computes the outputs for step n from the step-n inputs and advances the
  // internal state.
  virtual void step(const double* in, double* out, const StepInfo& info) = 0;
  // Outputs published at step 0 when the block runs lagged.
  virtual void initial(double* out) const;
};

struct BehaviorDef {
  std::string fqn;
  std::vector<PortDef> inputs;
  std::vector<PortDef> outputs;
  std::map<std::string, std::string> defaults;
  // Holds state across steps, so it may run one step lagged to break a cycle.
  bool state_breaking = false;
  // step_size 0 only validates the parameters. Throws ElaborationError, or
  // SimulationError when the step size does not fit a parameter.
  std::function<std::unique_ptr<BlockState>(const ParamSet&, double step_size)> make;
};

class BehaviorRegistry {
 public:
  void add(BehaviorDef def);
  const BehaviorDef* find(std::string_view fqn) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, BehaviorDef, std::less<>> defs_;
};

// CDL elementary blocks plus the Modelica.Blocks.Logical allowlist.
const BehaviorRegistry& default_registry();

// ---------------------------------------------------------------------------
// network

struct NetworkNode {
  std::string instance;
  const BehaviorDef* behavior = nullptr;
  ParamSet params;
  std::vector<int> inputs;   // signal slots
  std::vector<int> outputs;  // signal slots
  bool lagged = false;
};

class Network {
 public:
  const ModelicaBlock& block() const { return *block_; }
  // Instances in evaluation order.
  const std::vector<NetworkNode>& nodes() const { return nodes_; }
  std::vector<std::string> order() const;
  std::vector<std::string> lagged() const;

 private:
  friend Network elaborate(const ModelicaBlock&, const LibraryIndex&, const BehaviorRegistry&);
  friend SimulationTrace simulate(const Network&, const SimulationTrace&, double, double);

  std::shared_ptr<const ModelicaBlock> block_;
  std::vector<NetworkNode> nodes_;
  std::vector<std::string> slot_names_;   // first port path bound to the slot
  std::vector<SignalKind> slot_kinds_;
  std::vector<std::pair<std::string, int>> ports_;  // every port path -> slot, trace order
  std::vector<std::pair<std::string, int>> input_slots_;  // block input connector -> slot
};

// Throws UnknownBehavior, UnresolvedPort, KindMismatch or AlgebraicLoop.
Network elaborate(const ModelicaBlock& block, const LibraryIndex& index,
                  const BehaviorRegistry& registry = default_registry());

// `inputs` holds one series per block input connector. The result covers the
// block connectors and every instance port. Throws KindMismatch or
// SimulationError.
SimulationTrace simulate(const Network& network, const SimulationTrace& inputs, double step_size,
                         double horizon);

// CSV: `time_s` column then one column per port.
std::string write_trace_csv(const SimulationTrace& trace);
// Columns are typed by `kinds`; a column missing from `kinds` is an error.
SimulationTrace read_trace_csv(std::string_view text, const std::map<std::string, SignalKind>& kinds);

}  // namespace cdlgen
