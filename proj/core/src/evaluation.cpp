#include "cdlgen/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "cdlgen/error.hpp"
#include "cdlgen/prompt.hpp"
#include "util.hpp"

namespace cdlgen {

namespace fs = std::filesystem;

std::string_view to_string(EffortBand e) {
  switch (e) {
    case EffortBand::minor: return "minor";
    case EffortBand::moderate: return "moderate";
    case EffortBand::major: return "major";
  }
  return "major";
}

std::optional<double> EvaluationRecord::score() const {
  const std::vector<int>* bits = path_a ? &*path_a : path_b ? &*path_b : nullptr;
  if (!bits || bits->empty()) return std::nullopt;
  return static_cast<double>(std::accumulate(bits->begin(), bits->end(), 0)) / static_cast<double>(bits->size());
}

void check_record(const EvaluationRecord& r) {
  if (!r.gate) throw FormInvalid("behaves_correctly", "verdict is missing");
  if (r.evaluator.kind == Evaluator::Kind::ai) {
    // the evaluator role answers the gate only
    if (r.path_a || r.path_b) throw FormInvalid(r.path_a ? "path_a" : "path_b", "AI records carry no criterion bits");
    return;
  }
  if (*r.gate && !r.path_a) throw FormInvalid("path_a", "gate is yes but Path A is not filled");
  if (*r.gate && r.path_b) throw FormInvalid("path_b", "gate is yes but Path B is filled");
  if (!*r.gate && !r.path_b) throw FormInvalid("path_b", "gate is no but Path B is not filled");
  if (!*r.gate && r.path_a) throw FormInvalid("path_a", "gate is no but Path A is filled");
  if (*r.gate && r.effort) throw FormInvalid("effort", "effort band applies only to non-compliant modules");
  auto bits_ok = [](const std::vector<int>& v, std::size_t n, const char* field) {
    if (v.size() != n) throw FormInvalid(field, "expected " + std::to_string(n) + " bits");
    for (int b : v)
      if (b != 0 && b != 1) throw FormInvalid(field, "bits must be 0 or 1");
  };
  if (r.path_a) bits_ok(*r.path_a, kPathACriteria.size(), "path_a");
  if (r.path_b) bits_ok(*r.path_b, kPathBCriteria.size(), "path_b");
}

namespace {

std::string evaluator_text(const Evaluator& e) {
  return std::string(e.kind == Evaluator::Kind::ai ? "ai:" : "human:") + e.name;
}

template <std::size_t N>
void path_section(std::ostream& os, const char* header, const std::array<std::string_view, N>& names,
                  const std::optional<std::vector<int>>& bits) {
  os << "[" << header << "]\n";
  for (std::size_t i = 0; i < N; ++i)
    os << names[i] << "=" << (bits && i < bits->size() ? std::to_string((*bits)[i]) : "") << "\n";
}

std::string form_text(const EvaluationRecord& r, std::string_view status, bool guidance) {
  std::ostringstream os;
  if (guidance) os << "# Control block evaluation form. Fill values after '='; leave unused sections blank.\n";
  os << "[meta]\n"
     << "session_id=" << r.session_id << "\n"
     << "task_id=" << r.task_id << "\n"
     << "evaluator=" << evaluator_text(r.evaluator) << "\n";
  if (!status.empty()) os << "status=" << status << "\n";
  os << "\n[gate]\n";
  if (guidance) os << "# yes or no: does the module behave as the control sequence intends?\n";
  os << "behaves_correctly=" << (r.gate ? (*r.gate ? "yes" : "no") : "") << "\n\n";
  if (guidance) os << "# Path A, only when behaves_correctly=yes. 1 = criterion met, 0 = not met.\n";
  path_section(os, "path_a", kPathACriteria, r.path_a);
  os << "\n";
  if (guidance) os << "# Path B, only when behaves_correctly=no. 1 = criterion met, 0 = not met.\n";
  path_section(os, "path_b", kPathBCriteria, r.path_b);
  os << "\n[faults]\n";
  if (guidance)
    os << "# One per line: <class>=<note>. Classes: duplicate_path, inverted_direction, unknown_class,\n"
          "# broken_connection, type_mismatch, scope_violation, interface_mismatch, version_drift.\n";
  for (const auto& f : r.faults) os << to_string(f.fault) << "=" << f.note << "\n";
  os << "\n[effort]\n";
  if (guidance) os << "# minor, moderate (1-8 h) or major; only when behaves_correctly=no.\n";
  os << "band=" << (r.effort ? std::string(to_string(*r.effort)) : "") << "\n";
  return os.str();
}

}  // namespace

std::string human_eval_form(const GenerationSession& session) {
  if (!session.final_artifact()) throw FormInvalid("session", "session has no final artifact to review");
  EvaluationRecord r;
  r.session_id = session.session_id;
  r.task_id = session.task.id;
  r.evaluator = {Evaluator::Kind::human, ""};
  std::string form = form_text(r, to_string(session.status), true);
  form += "\n# Final artifact (iteration " + std::to_string(session.final_artifact()->iteration) + "):\n";
  for (const auto& line : util::split(session.final_artifact()->source, '\n')) form += "#   " + line + "\n";
  return form;
}

std::string format_record(const EvaluationRecord& record) { return form_text(record, "", false); }

EvaluationRecord ingest_human_eval(std::string_view form) {
  EvaluationRecord r;
  std::string section;
  std::map<std::string, std::string> a, b;
  std::set<std::string> seen;
  for (const auto& raw : util::split(form, '\n')) {
    auto line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw FormInvalid(section.empty() ? "form" : section, "expected key=value: " + line);
    auto key = util::trim(line.substr(0, eq));
    auto value = util::trim(line.substr(eq + 1));
    if (section != "faults" && !seen.insert(section + "." + key).second)
      throw FormInvalid(key, "field given twice");
    if (section == "meta") {
      if (key == "session_id")
        r.session_id = value;
      else if (key == "task_id")
        r.task_id = value;
      else if (key == "evaluator") {
        if (util::starts_with(value, "ai:"))
          r.evaluator = {Evaluator::Kind::ai, value.substr(3)};
        else
          r.evaluator = {Evaluator::Kind::human, util::starts_with(value, "human:") ? value.substr(6) : value};
      } else if (key != "status")
        throw FormInvalid(key, "unknown field in [meta]");
    } else if (section == "gate") {
      if (key != "behaves_correctly") throw FormInvalid(key, "unknown field in [gate]");
      auto v = util::to_lower(value);
      if (v == "yes")
        r.gate = true;
      else if (v == "no")
        r.gate = false;
      else if (!v.empty())
        throw FormInvalid(key, "expected yes or no, got '" + value + "'");
    } else if (section == "path_a" || section == "path_b") {
      (section == "path_a" ? a : b)[key] = value;
    } else if (section == "faults") {
      auto f = fault_class_from(key);
      if (!f) throw FormInvalid(key, "unknown fault class");
      r.faults.push_back({*f, value});
    } else if (section == "effort") {
      if (key != "band") throw FormInvalid(key, "unknown field in [effort]");
      if (value == "minor")
        r.effort = EffortBand::minor;
      else if (value == "moderate")
        r.effort = EffortBand::moderate;
      else if (value == "major")
        r.effort = EffortBand::major;
      else if (!value.empty())
        throw FormInvalid("effort", "expected minor, moderate or major");
    } else {
      throw FormInvalid(section.empty() ? key : section, "field outside a known section");
    }
  }

  auto read_path = [](const std::map<std::string, std::string>& given, const auto& names,
                      const char* field) -> std::optional<std::vector<int>> {
    for (const auto& [k, v] : given)
      if (std::find(names.begin(), names.end(), k) == names.end()) throw FormInvalid(k, std::string("not a ") + field + " criterion");
    bool any = std::any_of(given.begin(), given.end(), [](const auto& kv) { return !kv.second.empty(); });
    if (!any) return std::nullopt;
    std::vector<int> bits;
    for (auto name : names) {
      auto it = given.find(std::string(name));
      if (it == given.end() || it->second.empty()) throw FormInvalid(std::string(name), "bit is missing");
      if (it->second != "0" && it->second != "1") throw FormInvalid(std::string(name), "expected 0 or 1");
      bits.push_back(it->second == "1");
    }
    return bits;
  };
  r.path_a = read_path(a, kPathACriteria, "path_a");
  r.path_b = read_path(b, kPathBCriteria, "path_b");
  if (r.session_id.empty()) throw FormInvalid("session_id", "missing");
  check_record(r);
  return r;
}

bool parse_verdict(std::string_view reply) {
  auto is_punct = [](char c) { return std::string_view(" \t\r\n.,!\"'`*").find(c) != std::string_view::npos; };
  std::size_t b = 0, e = reply.size();
  while (b < e && is_punct(reply[b])) ++b;
  while (e > b && is_punct(reply[e - 1])) --e;
  auto v = util::to_lower(reply.substr(b, e - b));
  if (v == "yes") return true;
  if (v == "no") return false;
  throw UnparseableVerdict(std::string(reply));
}

AiEvaluation ai_evaluate(const GenerationSession& session, EvalPathway pathway, Gateway& gateway,
                         const std::string& model_id, int max_tokens) {
  const Artifact* art = session.final_artifact();
  if (!art) throw ConfigError("AI evaluation needs a final artifact");
  std::string task = control_task_prompt(session.task);
  PromptBundle bundle;
  if (pathway == EvalPathway::trace_based) {
    if (!art->trace) throw ConfigError("trace-based evaluation needs a simulate-gate trace");
    SimulationTrace io;
    io.step_size = art->trace->step_size;
    io.horizon = art->trace->horizon;
    for (const auto& p : art->trace->ports)
      if (p.find('.') == std::string::npos) io.add(p, art->trace->series.at(p));
    bundle = render(load_template("evaluation_trace"), {{"task", task}, {"trace", write_trace_csv(io)}});
  } else {
    bundle = render(load_template("evaluation_code"), {{"task", task}, {"code_content", art->source}});
  }
  AiEvaluation out;
  out.call.role_id = bundle.role_id;
  out.call.request.model_id = model_id;
  out.call.request.system_text = bundle.system_text;
  out.call.request.user_text = bundle.user_text;
  out.call.request.max_tokens = max_tokens;
  out.call.response = gateway.complete(out.call.request);
  out.record.session_id = session.session_id;
  out.record.task_id = session.task.id;
  out.record.evaluator = {Evaluator::Kind::ai, model_id};
  try {
    out.record.gate = parse_verdict(out.call.response.text);
  } catch (const UnparseableVerdict& e) {
    out.error = e.what();
  }
  return out;
}

AggregateReport aggregate_report(const std::vector<EvaluationRecord>& records,
                                 const std::vector<SessionOutcome>& sessions) {
  AggregateReport rep;
  rep.sessions = sessions.size();
  std::map<std::string, int> a_pass, b_pass;
  int a_n = 0, b_n = 0;
  for (const auto& r : records) {
    if (r.evaluator.kind != Evaluator::Kind::human) continue;
    for (const auto& f : r.faults) ++rep.fault_counts[std::string(to_string(f.fault))];
    if (r.effort) ++rep.effort_counts[std::string(to_string(*r.effort))];
    if (r.path_a) {
      ++a_n;
      for (std::size_t i = 0; i < kPathACriteria.size(); ++i) a_pass[std::string(kPathACriteria[i])] += (*r.path_a)[i];
    }
    if (r.path_b) {
      ++b_n;
      for (std::size_t i = 0; i < kPathBCriteria.size(); ++i) b_pass[std::string(kPathBCriteria[i])] += (*r.path_b)[i];
    }
  }
  for (auto name : kPathACriteria)
    if (a_n) rep.criterion_pass_rate[std::string(name)] = static_cast<double>(a_pass[std::string(name)]) / a_n;
  for (auto name : kPathBCriteria)
    if (b_n) rep.criterion_pass_rate[std::string(name)] = static_cast<double>(b_pass[std::string(name)]) / b_n;

  auto latest = [&](const std::string& id, Evaluator::Kind kind) -> const EvaluationRecord* {
    const EvaluationRecord* hit = nullptr;
    for (const auto& r : records)
      if (r.session_id == id && r.evaluator.kind == kind && r.gate) hit = &r;
    return hit;
  };
  auto yn = [](const EvaluationRecord* r) -> std::string { return r ? (*r->gate ? "yes" : "no") : ""; };
  for (const auto& s : sessions) {
    const auto* human = latest(s.session_id, Evaluator::Kind::human);
    const auto* ai = latest(s.session_id, Evaluator::Kind::ai);
    const auto* judge = human ? human : ai;
    bool ok = s.status == SessionStatus::converged && judge && *judge->gate;
    rep.successes += ok;
    auto& m = rep.agreement;
    if (human && ai) {
      bool h = *human->gate, x = *ai->gate;
      (h ? (x ? m.yes_yes : m.yes_no) : (x ? m.no_yes : m.no_no))++;
      if (h != x) m.disagreements.push_back(s.session_id);
    } else {
      ++m.no_data;
    }
    auto score = human ? human->score() : std::nullopt;
    rep.rows.push_back(s.session_id + "," + s.task_id + "," + std::string(to_string(s.status)) + "," +
                       std::to_string(s.compile_iters) + "," + std::to_string(s.sim_iters) + "," + yn(human) + "," +
                       yn(ai) + "," + (score ? util::format_real(*score) : "") + "," + (ok ? "1" : "0"));
  }
  rep.success_rate = rep.sessions ? static_cast<double>(rep.successes) / static_cast<double>(rep.sessions) : 0;
  return rep;
}

std::string format_report(const AggregateReport& r) {
  std::ostringstream os;
  char pct[32];
  std::snprintf(pct, sizeof pct, "%.1f%%", r.success_rate * 100);
  os << "sessions: " << r.sessions << "\n"
     << "successes: " << r.successes << "\n"
     << "success rate: " << pct << "\n";
  if (!r.criterion_pass_rate.empty()) {
    os << "criterion pass rates:\n";
    for (const auto& [k, v] : r.criterion_pass_rate) {
      std::snprintf(pct, sizeof pct, "%.1f%%", v * 100);
      os << "  " << k << ": " << pct << "\n";
    }
  }
  if (!r.fault_counts.empty()) {
    os << "fault classes:\n";
    for (const auto& [k, v] : r.fault_counts) os << "  " << k << ": " << v << "\n";
  }
  if (!r.effort_counts.empty()) {
    os << "effort bands:\n";
    for (const auto& [k, v] : r.effort_counts) os << "  " << k << ": " << v << "\n";
  }
  const auto& m = r.agreement;
  os << "human/ai agreement (human, ai):\n"
     << "  yes/yes: " << m.yes_yes << "\n  yes/no: " << m.yes_no << "\n  no/yes: " << m.no_yes
     << "\n  no/no: " << m.no_no << "\n  no data: " << m.no_data << "\n";
  for (const auto& id : m.disagreements) os << "  disagreement: " << id << "\n";
  return os.str();
}

std::string report_csv(const AggregateReport& r) {
  std::string out = "session_id,task_id,status,compile_iters,sim_iters,human_gate,ai_gate,score,success\n";
  for (const auto& row : r.rows) out += row + "\n";
  return out;
}

CostBenefitReport cost_benefit(double baseline_hours, double assisted_hours, double rate, std::size_t modules) {
  CostBenefitReport c;
  c.baseline_hours = baseline_hours;
  c.assisted_hours = assisted_hours;
  c.rate = rate;
  c.modules = modules;
  c.savings_per_module = (baseline_hours - assisted_hours) * rate;
  c.savings_percent = baseline_hours > 0 ? (baseline_hours - assisted_hours) / baseline_hours * 100 : 0;
  c.portfolio_savings = c.savings_per_module * static_cast<double>(modules);
  return c;
}

namespace {

struct SummaryFile {
  SessionOutcome outcome;
  std::string ai_verdict;
};

SummaryFile parse_summary(std::string_view text) {
  SummaryFile f;
  for (const auto& line : util::split(text, '\n')) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto k = line.substr(0, eq);
    auto v = line.substr(eq + 1);
    if (k == "session_id") f.outcome.session_id = v;
    if (k == "task_id") f.outcome.task_id = v;
    if (k == "status") {
      auto s = session_status_from(v);
      if (!s) throw ConfigError("session summary has unknown status '" + v + "'");
      f.outcome.status = *s;
    }
    if (k == "compile_iters") f.outcome.compile_iters = static_cast<int>(util::parse_int(v).value_or(0));
    if (k == "sim_iters") f.outcome.sim_iters = static_cast<int>(util::parse_int(v).value_or(0));
    if (k == "ai_verdict") f.ai_verdict = v;
  }
  return f;
}

}  // namespace

ReportInputs load_report_inputs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && (e.path().filename() == "session.summary" || e.path().extension() == ".form"))
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  ReportInputs in;
  for (const auto& p : files) {
    auto text = util::read_file(p);
    if (p.extension() == ".form") {
      in.records.push_back(ingest_human_eval(text));
      continue;
    }
    auto f = parse_summary(text);
    if (f.ai_verdict == "yes" || f.ai_verdict == "no") {
      EvaluationRecord r;
      r.session_id = f.outcome.session_id;
      r.task_id = f.outcome.task_id;
      r.evaluator = {Evaluator::Kind::ai, "session"};
      r.gate = f.ai_verdict == "yes";
      in.records.push_back(r);
    }
    in.sessions.push_back(f.outcome);
  }
  return in;
}

}  // namespace cdlgen
