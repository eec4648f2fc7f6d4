#include "cdlgen/interpreter.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

#include "cdlgen/error.hpp"
#include "util.hpp"

namespace cdlgen {

SignalKind kind_of(const SignalValue& v) {
  switch (v.index()) {
    case 0: return SignalKind::Real;
    case 1: return SignalKind::Boolean;
    default: return SignalKind::Integer;
  }
}

std::string format_value(const SignalValue& v) {
  if (auto d = std::get_if<double>(&v)) return util::format_real(*d);
  if (auto b = std::get_if<bool>(&v)) return *b ? "1" : "0";
  return std::to_string(std::get<long long>(v));
}

double as_double(const SignalValue& v) {
  if (auto d = std::get_if<double>(&v)) return *d;
  if (auto b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  return static_cast<double>(std::get<long long>(v));
}

std::size_t step_count(double step_size, double horizon) {
  if (!(step_size > 0) || !(horizon >= 0) || !std::isfinite(horizon))
    throw SimulationError("step size must be positive and horizon non-negative");
  double q = horizon / step_size;
  return static_cast<std::size_t>(std::floor(q + 1e-9)) + 1;
}

std::size_t SimulationTrace::steps() const { return step_count(step_size, horizon); }

void SimulationTrace::add(const std::string& port, Series values) {
  if (!series.count(port)) ports.push_back(port);
  series[port] = std::move(values);
}

const Series& probe(const SimulationTrace& trace, std::string_view port) {
  auto it = trace.series.find(port);
  if (it == trace.series.end()) throw UnknownPort(std::string(port));
  return it->second;
}

// ---------------------------------------------------------------------------

namespace {

const std::string& param_value(const std::map<std::string, std::string>& values, std::string_view name) {
  auto it = values.find(std::string(name));
  if (it == values.end()) throw ElaborationError("no parameter '" + std::string(name) + "'");
  return it->second;
}

}  // namespace

double ParamSet::number(std::string_view name) const {
  const auto& v = param_value(values_, name);
  if (v == "true") return 1;
  if (v == "false") return 0;
  auto d = util::parse_double(v);
  if (!d) throw ElaborationError("parameter " + std::string(name) + " = '" + v + "' is not a number");
  return *d;
}

bool ParamSet::boolean(std::string_view name) const {
  const auto& v = param_value(values_, name);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ElaborationError("parameter " + std::string(name) + " = '" + v + "' is not a Boolean");
}

const std::string& ParamSet::text(std::string_view name) const { return param_value(values_, name); }

std::vector<std::string> Network::order() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) out.push_back(n.instance);
  return out;
}

std::vector<std::string> Network::lagged() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_)
    if (n.lagged) out.push_back(n.instance);
  return out;
}

namespace {

// Literal, or a reference to a parameter of the enclosing block (h=Thys).
// Anything else stays as text, which suits enumeration values.
std::string resolve_modifier(const ModelicaBlock& block, const std::string& raw, int depth = 0) {
  std::string v = util::trim(raw);
  if (depth > 8) throw ElaborationError("parameter reference chain too deep at '" + v + "'");
  if (v == "true" || v == "false" || util::parse_double(v)) return v;
  if (is_identifier(v)) {
    const Parameter* p = block.find_parameter(v);
    if (!p || !p->default_value)
      throw ElaborationError("modifier refers to '" + v + "', which is not a parameter with a value");
    return resolve_modifier(block, *p->default_value, depth + 1);
  }
  return v;
}

const BehaviorDef* resolve_behavior(const QualifiedName& ref, const LibraryIndex& index,
                                    const BehaviorRegistry& registry) {
  if (auto* def = registry.find(ref.str())) return def;
  auto res = resolve_version(index, ref);
  if (res.status == VersionResolution::Status::renamed)
    if (auto* def = registry.find(res.fqn->str())) return def;
  throw UnknownBehavior(ref.str());
}

enum class Role { source, sink };

struct PortInfo {
  SignalKind kind;
  Role role;
  int node = -1;  // instance index, -1 for block connectors
  int index = 0;  // port index within the instance's inputs or outputs
};

// Tarjan's SCC over adjacency lists. Returns components.
std::vector<std::vector<int>> strongly_connected(const std::vector<std::vector<int>>& adj) {
  int n = static_cast<int>(adj.size());
  std::vector<int> idx(n, -1), low(n, 0), stack;
  std::vector<bool> on_stack(n, false);
  std::vector<std::vector<int>> out;
  int counter = 0;
  std::function<void(int)> visit = [&](int v) {
    idx[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (int w : adj[v]) {
      if (idx[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], idx[w]);
      }
    }
    if (low[v] == idx[v]) {
      std::vector<int> comp;
      int w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
  };
  for (int v = 0; v < n; ++v)
    if (idx[v] < 0) visit(v);
  return out;
}

bool cyclic(const std::vector<int>& comp, const std::vector<std::vector<int>>& adj) {
  if (comp.size() > 1) return true;
  int v = comp[0];
  return std::find(adj[v].begin(), adj[v].end(), v) != adj[v].end();
}

}  // namespace

Network elaborate(const ModelicaBlock& block, const LibraryIndex& index, const BehaviorRegistry& registry) {
  Network net;
  net.block_ = std::make_shared<const ModelicaBlock>(block);
  const auto& insts = block.instances;
  const int n_inst = static_cast<int>(insts.size());

  std::vector<NetworkNode> nodes(n_inst);
  std::map<std::string, PortInfo, std::less<>> ports;
  std::vector<std::string> port_order;

  for (const auto& c : block.connectors) {
    ports[c.name] = {c.kind, c.direction == Direction::input ? Role::source : Role::sink};
    port_order.push_back(c.name);
  }
  for (int i = 0; i < n_inst; ++i) {
    const auto& inst = insts[i];
    const BehaviorDef* def = resolve_behavior(inst.class_ref, index, registry);
    auto values = def->defaults;
    for (const auto& m : inst.modifiers) {
      if (!values.count(m.name))
        throw ElaborationError(inst.name + ": " + def->fqn + " has no parameter '" + m.name + "'");
      values[m.name] = resolve_modifier(block, m.value);
    }
    nodes[i].instance = inst.name;
    nodes[i].behavior = def;
    nodes[i].params = ParamSet(std::move(values));
    try {
      def->make(nodes[i].params, 0);
    } catch (const ElaborationError& e) {
      throw ElaborationError(inst.name + ": " + e.what());
    }
    for (std::size_t k = 0; k < def->inputs.size(); ++k) {
      std::string path = inst.name + "." + def->inputs[k].name;
      ports[path] = {def->inputs[k].kind, Role::sink, i, static_cast<int>(k)};
      port_order.push_back(path);
    }
    for (std::size_t k = 0; k < def->outputs.size(); ++k) {
      std::string path = inst.name + "." + def->outputs[k].name;
      ports[path] = {def->outputs[k].kind, Role::source, i, static_cast<int>(k)};
      port_order.push_back(path);
    }
  }

  // sink path -> driving source path
  std::map<std::string, std::string> driver;
  for (const auto& eq : block.connects) {
    std::string a = eq.source.str(), b = eq.target.str();
    auto pa = ports.find(a), pb = ports.find(b);
    if (pa == ports.end()) throw UnresolvedPort(a, "no such port");
    if (pb == ports.end()) throw UnresolvedPort(b, "no such port");
    if (pa->second.role == pb->second.role)
      throw UnresolvedPort(b, pa->second.role == Role::source ? "connects two signal sources"
                                                              : "connects two signal receivers");
    if (pa->second.kind != pb->second.kind)
      throw KindMismatch(b, std::string(to_string(pa->second.kind)) + " connected to " +
                                std::string(to_string(pb->second.kind)));
    const std::string& src = pa->second.role == Role::source ? a : b;
    const std::string& dst = pa->second.role == Role::source ? b : a;
    if (!driver.emplace(dst, src).second) throw UnresolvedPort(dst, "driven more than once");
  }

  // Slots: one per source.
  std::map<std::string, int> slot_of;
  for (const auto& path : port_order) {
    const auto& info = ports[path];
    if (info.role != Role::source) continue;
    slot_of[path] = static_cast<int>(net.slot_names_.size());
    net.slot_names_.push_back(path);
    net.slot_kinds_.push_back(info.kind);
  }
  for (const auto& path : port_order) {
    const auto& info = ports[path];
    if (info.role != Role::sink) continue;
    auto d = driver.find(path);
    if (d == driver.end()) throw UnresolvedPort(path, "not connected");
    slot_of[path] = slot_of[d->second];
  }
  for (const auto& path : port_order) net.ports_.emplace_back(path, slot_of[path]);
  for (const auto& c : block.connectors)
    if (c.direction == Direction::input) net.input_slots_.emplace_back(c.name, slot_of[c.name]);

  std::vector<int> slot_owner(net.slot_names_.size(), -1);
  for (int i = 0; i < n_inst; ++i) {
    const auto* def = nodes[i].behavior;
    for (const auto& p : def->inputs) nodes[i].inputs.push_back(slot_of[insts[i].name + "." + p.name]);
    for (const auto& p : def->outputs) {
      int s = slot_of[insts[i].name + "." + p.name];
      nodes[i].outputs.push_back(s);
      slot_owner[s] = i;
    }
  }

  auto edges = [&](const std::vector<bool>& lagged) {
    std::vector<std::vector<int>> adj(n_inst);
    for (int j = 0; j < n_inst; ++j)
      for (int s : nodes[j].inputs) {
        int i = slot_owner[s];
        if (i >= 0 && !lagged[i] && std::find(adj[i].begin(), adj[i].end(), j) == adj[i].end())
          adj[i].push_back(j);
      }
    return adj;
  };

  std::vector<bool> lagged(n_inst, false);
  auto adj = edges(lagged);
  for (const auto& comp : strongly_connected(adj))
    if (cyclic(comp, adj))
      for (int v : comp)
        if (nodes[v].behavior->state_breaking) lagged[v] = true;
  adj = edges(lagged);
  std::vector<std::string> loop;
  for (const auto& comp : strongly_connected(adj))
    if (cyclic(comp, adj))
      for (int v : comp) loop.push_back(insts[v].name);
  if (!loop.empty()) {
    std::vector<std::string> ordered;
    for (const auto& inst : insts)
      if (std::find(loop.begin(), loop.end(), inst.name) != loop.end()) ordered.push_back(inst.name);
    throw AlgebraicLoop(ordered);
  }

  // Kahn's algorithm, ties broken by declaration order.
  std::vector<int> indeg(n_inst, 0);
  for (const auto& out : adj)
    for (int j : out) ++indeg[j];
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < n_inst; ++i)
    if (indeg[i] == 0) ready.push(i);
  while (!ready.empty()) {
    int i = ready.top();
    ready.pop();
    nodes[i].lagged = lagged[i];
    net.nodes_.push_back(nodes[i]);
    for (int j : adj[i])
      if (--indeg[j] == 0) ready.push(j);
  }
  return net;
}

SimulationTrace simulate(const Network& net, const SimulationTrace& inputs, double step_size, double horizon) {
  const std::size_t steps = step_count(step_size, horizon);
  const auto& block = net.block();

  std::vector<std::pair<int, const Series*>> feeds;
  for (const auto& [name, slot] : net.input_slots_) {
    auto it = inputs.series.find(name);
    if (it == inputs.series.end()) throw SimulationError("no input series for '" + name + "'");
    if (it->second.size() != steps)
      throw SimulationError("input series '" + name + "' has " + std::to_string(it->second.size()) +
                            " samples, expected " + std::to_string(steps));
    SignalKind want = block.find_connector(name)->kind;
    for (const auto& v : it->second)
      if (kind_of(v) != want)
        throw KindMismatch(name, "series holds " + std::string(to_string(kind_of(v))) + ", connector is " +
                                     std::string(to_string(want)));
    feeds.emplace_back(slot, &it->second);
  }

  struct Running {
    const NetworkNode* node;
    std::unique_ptr<BlockState> state;
    std::vector<double> in, out, pending;
  };
  std::vector<Running> run;
  run.reserve(net.nodes_.size());
  for (const auto& node : net.nodes_) {
    Running r{&node, nullptr, std::vector<double>(node.inputs.size()), std::vector<double>(node.outputs.size()),
              std::vector<double>(node.outputs.size())};
    try {
      r.state = node.behavior->make(node.params, step_size);
    } catch (const SimulationError& e) {
      throw SimulationError(node.instance + ": " + e.what());
    }
    if (node.lagged) r.state->initial(r.pending.data());
    run.push_back(std::move(r));
  }

  std::vector<double> slots(net.slot_names_.size(), 0.0);
  std::vector<std::vector<double>> columns(net.ports_.size());
  for (auto& c : columns) c.reserve(steps);

  auto evaluate = [&](Running& r, const StepInfo& info, double* dest) {
    for (std::size_t k = 0; k < r.in.size(); ++k) r.in[k] = slots[r.node->inputs[k]];
    r.state->step(r.in.data(), dest, info);
  };

  for (std::size_t n = 0; n < steps; ++n) {
    StepInfo info{n, step_size};
    for (const auto& [slot, series] : feeds) slots[slot] = as_double((*series)[n]);
    for (auto& r : run)
      if (r.node->lagged)
        for (std::size_t k = 0; k < r.out.size(); ++k) slots[r.node->outputs[k]] = r.pending[k];
    for (auto& r : run) {
      if (r.node->lagged) continue;
      evaluate(r, info, r.out.data());
      for (std::size_t k = 0; k < r.out.size(); ++k) slots[r.node->outputs[k]] = r.out[k];
    }
    for (auto& r : run)
      if (r.node->lagged) evaluate(r, info, r.pending.data());
    for (std::size_t p = 0; p < net.ports_.size(); ++p) columns[p].push_back(slots[net.ports_[p].second]);
  }

  SimulationTrace out;
  out.step_size = step_size;
  out.horizon = horizon;
  for (std::size_t p = 0; p < net.ports_.size(); ++p) {
    SignalKind kind = net.slot_kinds_[net.ports_[p].second];
    Series s;
    s.reserve(steps);
    for (double v : columns[p]) {
      switch (kind) {
        case SignalKind::Real: s.emplace_back(v); break;
        case SignalKind::Boolean: s.emplace_back(v != 0); break;
        case SignalKind::Integer: s.emplace_back(static_cast<long long>(std::llround(v))); break;
      }
    }
    out.add(net.ports_[p].first, std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string write_trace_csv(const SimulationTrace& trace) {
  std::string out = "time_s";
  for (const auto& p : trace.ports) out += "," + p;
  out += "\n";
  std::size_t n = 0;
  for (const auto& p : trace.ports) n = std::max(n, trace.series.at(p).size());
  for (std::size_t i = 0; i < n; ++i) {
    out += util::format_real(trace.time(i));
    for (const auto& p : trace.ports) {
      const auto& s = trace.series.at(p);
      out += ",";
      if (i < s.size()) out += format_value(s[i]);
    }
    out += "\n";
  }
  return out;
}

SimulationTrace read_trace_csv(std::string_view text, const std::map<std::string, SignalKind>& kinds) {
  auto lines = util::split(text, '\n');
  while (!lines.empty() && util::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw SimulationError("empty trace file");
  auto header = util::split(util::trim(lines[0]), ',');
  if (header.empty() || header[0] != "time_s") throw SimulationError("trace header must start with time_s");
  std::vector<SignalKind> col_kind;
  for (std::size_t c = 1; c < header.size(); ++c) {
    auto it = kinds.find(header[c]);
    if (it == kinds.end()) throw SimulationError("trace column '" + header[c] + "' is not an input of the block");
    col_kind.push_back(it->second);
  }
  std::vector<Series> cols(header.size() - 1);
  std::vector<double> times;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto cells = util::split(util::trim(lines[r]), ',');
    auto where = "trace line " + std::to_string(r + 1);
    if (cells.size() != header.size()) throw SimulationError(where + ": wrong number of cells");
    auto t = util::parse_double(cells[0]);
    if (!t) throw SimulationError(where + ": bad time '" + cells[0] + "'");
    times.push_back(*t);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      switch (col_kind[c - 1]) {
        case SignalKind::Real: {
          auto v = util::parse_double(cell);
          if (!v) throw KindMismatch(header[c], where + ": '" + cell + "' is not a Real");
          cols[c - 1].emplace_back(*v);
          break;
        }
        case SignalKind::Boolean:
          if (cell == "1" || cell == "true")
            cols[c - 1].emplace_back(true);
          else if (cell == "0" || cell == "false")
            cols[c - 1].emplace_back(false);
          else
            throw KindMismatch(header[c], where + ": '" + cell + "' is not a Boolean");
          break;
        case SignalKind::Integer: {
          auto v = util::parse_int(cell);
          if (!v) throw KindMismatch(header[c], where + ": '" + cell + "' is not an Integer");
          cols[c - 1].emplace_back(*v);
          break;
        }
      }
    }
  }
  SimulationTrace trace;
  if (times.size() >= 2) trace.step_size = times[1] - times[0];
  if (times.front() != 0) throw SimulationError("trace must start at time 0");
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::fabs(times[i] - trace.time(i)) > 1e-6 * std::max(1.0, trace.time(i)))
      throw SimulationError("trace times are not evenly spaced at row " + std::to_string(i + 2));
  trace.horizon = trace.time(times.size() - 1);
  for (std::size_t c = 1; c < header.size(); ++c) trace.add(header[c], std::move(cols[c - 1]));
  return trace;
}

}  // namespace cdlgen
