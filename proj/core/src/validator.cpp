#include "cdlgen/validator.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "cdlgen/error.hpp"
#include "cdlgen/interpreter.hpp"
#include "util.hpp"

namespace cdlgen {

std::string_view to_string(Severity s) { return s == Severity::error ? "error" : "warning"; }

namespace {

constexpr std::string_view kFaultNames[] = {
    "duplicate_path", "inverted_direction", "unknown_class",  "broken_connection",
    "version_drift",  "scope_violation",    "type_mismatch", "interface_mismatch",
};

constexpr std::string_view kCdlRoot = "Buildings.Controls.OBC.CDL.";

}  // namespace

std::string_view to_string(FaultClass f) { return kFaultNames[static_cast<int>(f)]; }

std::optional<FaultClass> fault_class_from(std::string_view name) {
  for (int i = 0; i < 8; ++i)
    if (kFaultNames[i] == name) return static_cast<FaultClass>(i);
  return std::nullopt;
}

std::size_t ValidationReport::error_count() const {
  return static_cast<std::size_t>(std::count_if(diagnostics.begin(), diagnostics.end(),
                                                [](const Diagnostic& d) { return d.severity == Severity::error; }));
}

bool ValidationReport::has(FaultClass f, Severity s) const {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [&](const Diagnostic& d) { return d.severity == s && d.fault_class == f; });
}

const std::vector<std::string>& standard_library_allowlist() {
  static const std::vector<std::string> list = {
      "Modelica.Blocks.Logical.And",
      "Modelica.Blocks.Logical.LogicalSwitch",
      "Modelica.Blocks.Logical.Not",
      "Modelica.Blocks.Logical.Or",
  };
  return list;
}

namespace {

bool allowlisted(const std::string& fqn) {
  const auto& l = standard_library_allowlist();
  return std::find(l.begin(), l.end(), fqn) != l.end();
}

enum class Role { source, sink };

struct Endpoint {
  SignalKind kind;
  Role role;
  int instance = -1;
};

// Resolved class of each instance, when it can be resolved.
struct ClassInfo {
  std::optional<std::string> fqn;
  std::optional<InterfaceSignature> ports;
};

ClassInfo resolve_class(const QualifiedName& ref, const LibraryIndex& index) {
  ClassInfo info;
  auto res = resolve_version(index, ref);
  if (res.status != VersionResolution::Status::unknown) {
    info.fqn = res.fqn->str();
    info.ports = index.find(*res.fqn)->interface;
    return info;
  }
  if (allowlisted(ref.str())) {
    if (const BehaviorDef* def = default_registry().find(ref.str())) {
      InterfaceSignature sig;
      for (const auto& p : def->inputs) sig.inputs.push_back({p.name, p.kind, Direction::input, false});
      for (const auto& p : def->outputs) sig.outputs.push_back({p.name, p.kind, Direction::output, false});
      info.fqn = ref.str();
      info.ports = sig;
    }
  }
  return info;
}

std::string terminal_of(const std::string& fqn) {
  auto dot = fqn.rfind('.');
  return dot == std::string::npos ? fqn : fqn.substr(dot + 1);
}

bool is_controller(const ClassInfo& c) {
  if (!c.fqn) return false;
  auto t = terminal_of(*c.fqn);
  return util::starts_with(*c.fqn, kCdlRoot) && (t == "PID" || t == "PIDWithReset");
}

// Merges signals by arithmetic rather than selection.
bool is_combiner(const ClassInfo& c) {
  if (!c.ports || c.ports->inputs.size() < 2) return false;
  auto t = terminal_of(*c.fqn);
  return t != "Switch" && t != "LogicalSwitch";
}

class Checker {
 public:
  Checker(const ModelicaBlock& b, const LibraryIndex& idx, const ReferenceTask* task)
      : b_(b), idx_(idx), task_(task) {
    for (const auto& inst : b_.instances) classes_.push_back(resolve_class(inst.class_ref, idx_));
    for (std::size_t i = 0; i < b_.instances.size(); ++i) inst_index_[b_.instances[i].name] = static_cast<int>(i);
  }

  ValidationReport run() {
    rule_unknown_class();
    rule_scope();
    rule_types();
    rule_reachability();
    rule_duplicate_path();
    if (task_) rule_interface();
    if (task_ && task_->polarity) rule_polarity();
    std::stable_sort(report_.diagnostics.begin(), report_.diagnostics.end(),
                     [](const Diagnostic& a, const Diagnostic& b) { return a.rule_id < b.rule_id; });
    report_.passed = report_.error_count() == 0;
    return std::move(report_);
  }

 private:
  void emit(std::string rule, Severity sev, std::optional<FaultClass> fc, std::string loc, int line,
            std::string msg, std::optional<std::string> suggestion = std::nullopt) {
    report_.diagnostics.push_back(
        {std::move(rule), sev, fc, std::move(loc), line, std::move(msg), std::move(suggestion)});
  }

  void rule_unknown_class() {
    report_.checked_rules.push_back("R1");
    for (const auto& inst : b_.instances) {
      std::string ref = inst.class_ref.str();
      if (allowlisted(ref)) continue;
      auto res = resolve_version(idx_, inst.class_ref);
      if (res.status == VersionResolution::Status::renamed) {
        emit("R1", Severity::warning, FaultClass::version_drift, "instance " + inst.name, inst.line.value,
             ref + " is not in " + idx_.version() + "; it was renamed to " + res.fqn->str(), res.fqn->str());
      } else if (res.status == VersionResolution::Status::unknown) {
        emit("R1", Severity::error, FaultClass::unknown_class, "instance " + inst.name, inst.line.value,
             ref + " does not exist in " + idx_.version());
      }
    }
  }

  void rule_scope() {
    report_.checked_rules.push_back("R2");
    for (const auto& inst : b_.instances) {
      std::string ref = inst.class_ref.str();
      if (util::starts_with(ref, kCdlRoot) || allowlisted(ref)) continue;
      emit("R2", Severity::error, FaultClass::scope_violation, "instance " + inst.name, inst.line.value,
           ref + " is outside the CDL library and the standard-library allowlist");
    }
  }

  std::optional<Endpoint> endpoint(const PortPath& p, std::string& why) const {
    if (p.segments.size() == 1) {
      const Connector* c = b_.find_connector(p.head());
      if (!c) {
        why = "no connector named " + p.head();
        return std::nullopt;
      }
      return Endpoint{c->kind, c->direction == Direction::input ? Role::source : Role::sink, -1};
    }
    if (p.segments.size() != 2) {
      why = "port path " + p.str() + " is nested too deeply";
      return std::nullopt;
    }
    auto it = inst_index_.find(p.head());
    if (it == inst_index_.end()) {
      why = "no instance named " + p.head();
      return std::nullopt;
    }
    const auto& cls = classes_[it->second];
    if (!cls.ports) return std::nullopt;  // R1 already reports the class
    const std::string& port = p.segments[1];
    for (const auto& s : cls.ports->inputs)
      if (s.name == port) return Endpoint{s.kind, Role::sink, it->second};
    for (const auto& s : cls.ports->outputs)
      if (s.name == port) return Endpoint{s.kind, Role::source, it->second};
    why = *cls.fqn + " has no port " + port;
    return std::nullopt;
  }

  void rule_types() {
    report_.checked_rules.push_back("R3");
    std::set<std::string> driven;
    for (std::size_t i = 0; i < b_.connects.size(); ++i) {
      const auto& eq = b_.connects[i];
      std::string loc = "connect " + std::to_string(i + 1);
      int line = eq.line.value;
      std::string why_a, why_b;
      auto a = endpoint(eq.source, why_a);
      auto b = endpoint(eq.target, why_b);
      if (!a || !b) {
        for (const auto* why : {&why_a, &why_b})
          if (!why->empty())
            emit("R3", Severity::error, FaultClass::broken_connection, loc, line, "unresolved endpoint: " + *why);
        continue;
      }
      std::string text = "connect(" + eq.source.str() + ", " + eq.target.str() + ")";
      if (a->role == b->role) {
        emit("R3", Severity::error, FaultClass::type_mismatch, loc, line,
             text + " joins two " + (a->role == Role::source ? "outputs" : "inputs"));
        continue;
      }
      if (a->kind != b->kind) {
        emit("R3", Severity::error, FaultClass::type_mismatch, loc, line,
             text + " joins " + std::string(to_string(a->kind)) + " and " + std::string(to_string(b->kind)));
        continue;
      }
      const PortPath& sink = a->role == Role::sink ? eq.source : eq.target;
      const PortPath& src = a->role == Role::sink ? eq.target : eq.source;
      if (!driven.insert(sink.str()).second) {
        emit("R3", Severity::error, FaultClass::broken_connection, loc, line, sink.str() + " is driven more than once");
        continue;
      }
      driver_[sink.str()] = src.str();
    }
  }

  // Instance inputs in the backward cone of `sink` that have no driver.
  void dangling_from(const std::string& sink, std::set<std::string>& dangling, std::set<int>& cone,
                     std::set<std::string>& seen) const {
    if (!seen.insert(sink).second) return;
    auto d = driver_.find(sink);
    if (d == driver_.end()) {
      dangling.insert(sink);
      return;
    }
    auto path = PortPath::parse(d->second);
    if (path.is_connector()) return;  // block input
    int inst = inst_index_.at(path.head());
    if (!cone.insert(inst).second) return;
    const auto& cls = classes_[inst];
    if (!cls.ports) return;
    for (const auto& in : cls.ports->inputs) dangling_from(path.head() + "." + in.name, dangling, cone, seen);
  }

  void rule_reachability() {
    report_.checked_rules.push_back("R4");
    std::set<int> used;
    std::set<std::string> reported;
    for (const auto& c : b_.connectors) {
      if (c.direction != Direction::output) continue;
      std::set<std::string> dangling, seen;
      std::set<int> cone;
      dangling_from(c.name, dangling, cone, seen);
      used.insert(cone.begin(), cone.end());
      if (dangling.empty() || (c.condition && !util::trim(*c.condition).empty())) continue;
      std::vector<std::string> names(dangling.begin(), dangling.end());
      reported.insert(dangling.begin(), dangling.end());
      std::string msg = dangling.count(c.name) ? "output " + c.name + " is not connected"
                                               : "output " + c.name + " is not reached from the inputs: " +
                                                     util::join(names, ", ") + " not connected";
      emit("R4", Severity::error, FaultClass::broken_connection, "output " + c.name, c.line.value, msg);
    }
    for (std::size_t i = 0; i < b_.instances.size(); ++i) {
      const auto& inst = b_.instances[i];
      const auto& cls = classes_[i];
      if (cls.ports)
        for (const auto& in : cls.ports->inputs) {
          std::string p = inst.name + "." + in.name;
          if (!driver_.count(p) && !reported.count(p))
            emit("R4", Severity::error, FaultClass::broken_connection, "port " + p, inst.line.value,
                 "input " + p + " is not connected");
        }
      if (!used.count(static_cast<int>(i)))
        emit("R4", Severity::warning, FaultClass::broken_connection, "instance " + inst.name, inst.line.value,
             "instance " + inst.name + " does not contribute to any output");
    }
  }

  std::vector<std::set<int>> forward_reach() const {
    int n = static_cast<int>(b_.instances.size());
    std::vector<std::set<int>> next(n);
    for (const auto& [sink, src] : driver_) {
      auto s = PortPath::parse(src), d = PortPath::parse(sink);
      if (s.is_connector() || d.is_connector()) continue;
      next[inst_index_.at(s.head())].insert(inst_index_.at(d.head()));
    }
    std::vector<std::set<int>> reach(n);
    for (int i = 0; i < n; ++i) {
      std::vector<int> stack(next[i].begin(), next[i].end());
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        if (!reach[i].insert(v).second) continue;
        for (int w : next[v]) stack.push_back(w);
      }
    }
    return reach;
  }

  void rule_duplicate_path() {
    report_.checked_rules.push_back("R5");
    int n = static_cast<int>(b_.instances.size());
    std::vector<int> ctrls;
    for (int i = 0; i < n; ++i)
      if (is_controller(classes_[i])) ctrls.push_back(i);
    if (ctrls.size() < 2) return;
    auto reach = forward_reach();
    // Output connectors each instance drives directly.
    std::vector<std::set<std::string>> outs(n);
    for (const auto& [sink, src] : driver_) {
      auto s = PortPath::parse(src);
      if (!s.is_connector() && PortPath::parse(sink).is_connector()) outs[inst_index_.at(s.head())].insert(sink);
    }
    auto outputs_of = [&](int m) {
      std::set<std::string> o = outs[m];
      for (int v : reach[m]) o.insert(outs[v].begin(), outs[v].end());
      return o;
    };
    std::set<std::string> flagged;
    for (std::size_t a = 0; a < ctrls.size(); ++a)
      for (std::size_t b = a + 1; b < ctrls.size(); ++b)
        for (int m = 0; m < n; ++m) {
          if (!reach[ctrls[a]].count(m) || !reach[ctrls[b]].count(m) || !is_combiner(classes_[m])) continue;
          for (const auto& o : outputs_of(m)) {
            if (!flagged.insert(o).second) continue;
            const Connector* c = b_.find_connector(o);
            emit("R5", Severity::error, FaultClass::duplicate_path, "output " + o, c ? c->line.value : 0,
                 "controllers " + b_.instances[ctrls[a]].name + " and " + b_.instances[ctrls[b]].name +
                     " both act on " + o + " through " + b_.instances[m].name);
          }
        }
  }

  void rule_interface() {
    report_.checked_rules.push_back("R6");
    auto check = [&](const TaskPort& p, Direction dir) {
      const Connector* c = b_.find_connector(p.name);
      std::string want = std::string(to_string(p.kind)) + " " + std::string(to_string(dir));
      if (!c) {
        emit("R6", Severity::error, FaultClass::interface_mismatch, "connector " + p.name, 0,
             "task declares " + want + " " + p.name + ", the block has no such connector");
      } else if (c->kind != p.kind || c->direction != dir) {
        emit("R6", Severity::error, FaultClass::interface_mismatch, "connector " + p.name, c->line.value,
             p.name + " is " + std::string(to_string(c->kind)) + " " + std::string(to_string(c->direction)) +
                 ", task declares " + want);
      }
    };
    for (const auto& p : task_->inputs) check(p, Direction::input);
    for (const auto& p : task_->outputs) check(p, Direction::output);
    for (const auto& c : b_.connectors) {
      bool declared = task_->find_input(c.name) != nullptr;
      for (const auto& o : task_->outputs) declared = declared || o.name == c.name;
      if (!declared)
        emit("R6", Severity::error, FaultClass::interface_mismatch, "connector " + c.name, c.line.value,
             "connector " + c.name + " is not part of the task interface");
    }
  }

  void rule_polarity() {
    if (report_.error_count() > 0) return;  // nothing to probe reliably
    report_.checked_rules.push_back("R7");
    const auto& pol = *task_->polarity;
    constexpr double dt = 10;
    constexpr int seg = 3;
    for (const auto& c : b_.connectors)
      if (c.direction == Direction::input && (!task_->probe_low.count(c.name) || !task_->probe_high.count(c.name))) {
        emit("R7", Severity::warning, std::nullopt, "connector " + c.name, c.line.value,
             "polarity probe skipped: the task gives no probe value for " + c.name);
        return;
      }
    SimulationTrace in;
    in.step_size = dt;
    in.horizon = dt * (2 * seg - 1);
    for (const auto& c : b_.connectors) {
      if (c.direction != Direction::input) continue;
      Series s;
      for (const auto* probe_values : {&task_->probe_low, &task_->probe_high}) {
        double v = probe_values->at(c.name);
        for (int k = 0; k < seg; ++k) {
          switch (c.kind) {
            case SignalKind::Real: s.emplace_back(v); break;
            case SignalKind::Boolean: s.emplace_back(v != 0); break;
            case SignalKind::Integer: s.emplace_back(static_cast<long long>(v)); break;
          }
        }
      }
      in.add(c.name, std::move(s));
    }
    const Connector* out = b_.find_connector(pol.output);
    std::string loc = "output " + pol.output;
    int line = out ? out->line.value : 0;
    double y_low, y_high;
    try {
      auto trace = simulate(elaborate(b_, idx_), in, dt, in.horizon);
      const auto& y = probe(trace, pol.output);
      y_low = as_double(y[seg - 1]);
      y_high = as_double(y[2 * seg - 1]);
    } catch (const Error& e) {
      emit("R7", Severity::warning, std::nullopt, loc, line, std::string("polarity probe did not run: ") + e.what());
      return;
    }
    double d_in = task_->probe_high.at(pol.error_input) - task_->probe_low.at(pol.error_input);
    int want = pol.sign * (d_in > 0 ? 1 : -1);
    double d_out = y_high - y_low;
    int got = d_out > 0 ? 1 : d_out < 0 ? -1 : 0;
    if (got == want) return;
    std::string moved = got == 0 ? "does not move" : got > 0 ? "rises" : "falls";
    emit("R7", Severity::error, FaultClass::inverted_direction, loc, line,
         pol.output + " " + moved + " (" + util::format_real(y_low) + " -> " + util::format_real(y_high) + ") when " +
             pol.error_input + " goes from " + util::format_real(task_->probe_low.at(pol.error_input)) + " to " +
             util::format_real(task_->probe_high.at(pol.error_input)) + "; expected it to " +
             (want > 0 ? "rise" : "fall"));
  }

  const ModelicaBlock& b_;
  const LibraryIndex& idx_;
  const ReferenceTask* task_;
  std::vector<ClassInfo> classes_;
  std::map<std::string, int> inst_index_;
  std::map<std::string, std::string> driver_;  // sink path -> source path
  ValidationReport report_;
};

}  // namespace

ValidationReport validate(const ModelicaBlock& block, const LibraryIndex& index, const ReferenceTask* task) {
  return Checker(block, index, task).run();
}

std::string format_diagnostics(const ValidationReport& report) {
  std::string out;
  for (const auto& d : report.diagnostics) {
    std::string msg = d.message;
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::replace(msg.begin(), msg.end(), '\t', ' ');
    out += std::string(to_string(d.severity)) + "\t" + d.rule_id + "\t" +
           (d.fault_class ? std::string(to_string(*d.fault_class)) : "-") + "\t" + d.location + "\t" + msg + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// fault seeding

namespace {

std::string fresh_name(const ModelicaBlock& b, const std::string& base) {
  std::string name = base;
  for (int k = 2; b.find_instance(name) || b.find_connector(name) || b.find_parameter(name); ++k)
    name = base + std::to_string(k);
  return name;
}

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::vector<std::size_t> controllers(const ModelicaBlock& b) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < b.instances.size(); ++i) {
    const auto& t = b.instances[i].class_ref.terminal();
    if (util::starts_with(b.instances[i].class_ref.str(), kCdlRoot) && (t == "PID" || t == "PIDWithReset"))
      out.push_back(i);
  }
  return out;
}

}  // namespace

SeededBlock seed_fault(const ModelicaBlock& block, FaultClass fault, std::uint64_t rng_seed, const LibraryIndex* index) {
  std::mt19937_64 rng(rng_seed);
  ModelicaBlock b = block;
  Injection rec{fault, "", ""};

  switch (fault) {
    case FaultClass::unknown_class: {
      if (b.instances.empty()) throw NotInjectable("unknown_class: block has no instances");
      std::vector<std::size_t> idx(b.instances.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      auto& inst = b.instances[pick(idx, rng)];
      static const std::vector<std::string> suffixes = {"Block", "Ex", "Op", "2"};
      auto segs = inst.class_ref.segments();
      std::string old = segs.back();
      do {
        segs.back() += pick(suffixes, rng);
      } while (index && index->find(QualifiedName(segs)));
      inst.class_ref = QualifiedName(segs);
      rec.target = "instance " + inst.name;
      rec.description = "class " + old + " renamed to nonexistent " + segs.back();
      break;
    }
    case FaultClass::broken_connection: {
      if (b.connects.empty()) throw NotInjectable("broken_connection: block has no connect equations");
      auto i = std::uniform_int_distribution<std::size_t>(0, b.connects.size() - 1)(rng);
      const auto& eq = b.connects[i];
      rec.target = "connect " + std::to_string(i + 1);
      rec.description = "removed connect(" + eq.source.str() + ", " + eq.target.str() + ")";
      b.connects.erase(b.connects.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
    case FaultClass::duplicate_path: {
      auto ctrls = controllers(b);
      if (ctrls.empty()) throw NotInjectable("duplicate_path: block has no P/PI controller");
      ComponentInstance orig = b.instances[pick(ctrls, rng)];
      ComponentInstance dup = orig;
      dup.name = fresh_name(b, orig.name + "Dup");
      dup.doc = "Second controller";
      dup.annotation.reset();
      ComponentInstance sum;
      sum.class_ref = QualifiedName::parse(std::string(kCdlRoot) + "Reals.Add");
      sum.name = fresh_name(b, orig.name + "Sum");
      sum.doc = "Adds both controller outputs";
      std::vector<ConnectEquation> added;
      for (auto& eq : b.connects) {
        for (PortPath* p : {&eq.source, &eq.target}) {
          if (p->segments.size() == 2 && p->head() == orig.name && p->segments[1] == "y")
            *p = PortPath::parse(sum.name + ".y");
        }
        // Same drivers for the copy's inputs.
        for (auto [from, to] : {std::pair{&eq.source, &eq.target}, std::pair{&eq.target, &eq.source}})
          if (to->segments.size() == 2 && to->head() == orig.name && to->segments[1] != "y")
            added.push_back({*from, PortPath::parse(dup.name + "." + to->segments[1]), std::nullopt, {}});
      }
      added.push_back({PortPath::parse(orig.name + ".y"), PortPath::parse(sum.name + ".u1"), std::nullopt, {}});
      added.push_back({PortPath::parse(dup.name + ".y"), PortPath::parse(sum.name + ".u2"), std::nullopt, {}});
      b.instances.push_back(dup);
      b.instances.push_back(sum);
      b.connects.insert(b.connects.end(), added.begin(), added.end());
      rec.target = "instance " + orig.name;
      rec.description = "added " + dup.name + " in parallel with " + orig.name + ", summed by " + sum.name;
      break;
    }
    case FaultClass::inverted_direction: {
      auto ctrls = controllers(b);
      if (ctrls.empty()) throw NotInjectable("inverted_direction: block has no P/PI controller");
      auto& inst = b.instances[pick(ctrls, rng)];
      rec.target = "instance " + inst.name;
      if (std::bernoulli_distribution(0.5)(rng)) {
        auto it = std::find_if(inst.modifiers.begin(), inst.modifiers.end(),
                               [](const Modifier& m) { return m.name == "reverseActing"; });
        std::string now = it == inst.modifiers.end() ? "true" : util::trim(it->value);
        if (now != "true" && now != "false")
          throw NotInjectable("inverted_direction: reverseActing of " + inst.name + " is not a literal");
        std::string flipped = now == "true" ? "false" : "true";
        if (it == inst.modifiers.end())
          inst.modifiers.push_back({"reverseActing", flipped, false, false});
        else
          it->value = flipped;
        rec.description = "reverseActing of " + inst.name + " flipped to " + flipped;
      } else {
        std::string us = inst.name + ".u_s", um = inst.name + ".u_m";
        for (auto& eq : b.connects)
          for (PortPath* p : {&eq.source, &eq.target}) {
            if (p->str() == us)
              *p = PortPath::parse(um);
            else if (p->str() == um)
              *p = PortPath::parse(us);
          }
        rec.description = "setpoint and measurement of " + inst.name + " swapped";
      }
      break;
    }
    default:
      throw NotInjectable(std::string(to_string(fault)) + " is not a seedable fault class");
  }
  return {std::move(b), std::move(rec)};
}

}  // namespace cdlgen
