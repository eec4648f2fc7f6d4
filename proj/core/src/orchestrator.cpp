#include "cdlgen/orchestrator.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <set>
#include <sstream>

#include "cdlgen/error.hpp"
#include "cdlgen/evaluation.hpp"
#include "cdlgen/prompt.hpp"
#include "util.hpp"

namespace cdlgen {

namespace fs = std::filesystem;

std::vector<std::string> parse_bullet_names(std::string_view reply) {
  std::vector<std::string> out;
  for (const auto& raw : util::split(reply, '\n')) {
    std::string line = util::trim(raw);
    // bullet glyphs, including the UTF-8 bullet
    for (bool again = true; again && !line.empty();) {
      again = false;
      if (line[0] == '-' || line[0] == '*' || line[0] == '+') {
        line = util::trim(line.substr(1));
        again = true;
      } else if (util::starts_with(line, "\xE2\x80\xA2")) {
        line = util::trim(line.substr(3));
        again = true;
      }
    }
    std::size_t d = 0;
    while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
    if (d > 0 && d < line.size() && (line[d] == '.' || line[d] == ')')) line = util::trim(line.substr(d + 1));
    std::string clean;
    for (char c : line)
      if (c != '`' && c != '*') clean += c;
    for (const auto& part : util::split(clean, ',')) {
      auto name = util::trim(part);
      while (!name.empty() && (name.back() == '.' || name.back() == ';')) name.pop_back();
      if (!name.empty() && name.find(' ') == std::string::npos) out.push_back(name);
    }
  }
  return out;
}

namespace {

TranscriptEntry ask(Gateway& gateway, const PromptBundle& bundle, const std::string& model_id, int max_tokens) {
  ChatRequest req;
  req.model_id = model_id;
  req.system_text = bundle.system_text;
  req.user_text = bundle.user_text;
  req.max_tokens = max_tokens;
  return {bundle.role_id, req, gateway.complete(req)};
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size()))
    s.replace(at, from.size(), to);
  return s;
}

bool command_exists(const std::string& cmd) {
  if (cmd.find('/') != std::string::npos) return ::access(cmd.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  if (!path) return false;
  for (const auto& dir : util::split(path, ':')) {
    if (dir.empty()) continue;
    if (::access((fs::path(dir) / cmd).c_str(), X_OK) == 0) return true;
  }
  return false;
}

std::string shell_quote(const std::string& s) { return "'" + replace_all(s, "'", "'\\''") + "'"; }

std::string guess_model_name(std::string_view source) {
  try {
    return parse(source).name;
  } catch (const Error&) {
  }
  std::istringstream in{std::string(source)};
  std::string word, prev;
  while (in >> word) {
    if (prev == "block" || prev == "model") return word;
    prev = word;
  }
  return "Unnamed";
}

constexpr std::string_view kDefaultScript = "loadFile(\"{source_path}\");\ncheckModel({model_name});\ngetErrorString();\n";

}  // namespace

namespace {

// Never throws NoModulesSelected, so the caller can keep the call.
SelectionResult select_unchecked(const ReferenceTask& task, const LibraryIndex& index, Gateway& gateway,
                                 const std::string& model_id, bool fuzzy, int max_tokens) {
  if (index.entries().empty()) throw EmptyIndex("module selection needs a non-empty index");
  auto bundle = render(load_template("control_expert"),
                       {{"task", control_task_prompt(task)}, {"txt", module_name_list(index)}});
  SelectionResult r;
  r.call = ask(gateway, bundle, model_id, max_tokens);
  std::set<std::string> seen;
  for (const auto& name : parse_bullet_names(r.call.response.text)) {
    auto hits = fuzzy ? baseline_fuzzy_search(index, name, 1) : hard_rule_lookup(index, name);
    if (!hits.found()) {
      r.notes.push_back("selector named unknown module '" + name + "', dropped");
      continue;
    }
    for (const auto& h : hits.hits)
      if (seen.insert(h.fqn).second)
        r.modules.push_back({h.fqn, fuzzy ? Provenance::fuzzy : Provenance::hard_rule, name});
  }
  return r;
}

}  // namespace

SelectionResult select_modules(const ReferenceTask& task, const LibraryIndex& index, Gateway& gateway,
                               const std::string& model_id, bool fuzzy, int max_tokens) {
  auto r = select_unchecked(task, index, gateway, model_id, fuzzy, max_tokens);
  if (r.modules.empty()) throw NoModulesSelected();
  return r;
}

CompileOutcome compile_external(std::string_view source, const ToolchainConfig& toolchain) {
  if (toolchain.command.empty() || !command_exists(toolchain.command))
    throw ToolchainUnavailable(toolchain.command);
  std::string script = toolchain.script_template_path.empty() ? std::string(kDefaultScript)
                                                               : util::read_file(toolchain.script_template_path);
  auto dir = fs::temp_directory_path() /
             ("cdlgen-" + util::sha256_hex(std::string(source) + toolchain.command).substr(0, 16) + "-" +
              std::to_string(::getpid()));
  fs::create_directories(dir);
  auto model = guess_model_name(source);
  auto src = dir / (model + ".mo");
  util::write_file(src, source);
  script = replace_all(script, "{source_path}", src.string());
  script = replace_all(script, "{model_name}", model);
  auto script_path = dir / "check.mos";
  util::write_file(script_path, script);

  std::string cmd;
  if (command_exists("timeout")) cmd = "timeout " + util::format_real(toolchain.timeout_s) + " ";
  cmd += shell_quote(toolchain.command) + " " + shell_quote(script_path.string()) + " 2>&1";
  CompileOutcome out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw ToolchainUnavailable(toolchain.command);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.log.append(buf, n);
  int status = ::pclose(pipe);
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::error_code ec;
  fs::remove_all(dir, ec);
  if (code == 124) out.log += "\ntoolchain timed out after " + util::format_real(toolchain.timeout_s) + " s";
  out.ok = code == 0 && out.log.find("Error:") == std::string::npos;
  return out;
}

std::string session_id_for(const ReferenceTask& task, const Config& config) {
  std::string basis = task.id + "\n" + control_task_prompt(task) + "\n";
  for (const auto& line : util::split(format_config(config), '\n'))
    if (!util::starts_with(line, "gateway.")) basis += line + "\n";
  std::string id = task.id;
  for (char& c : id)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  return "task" + id + "-" + util::sha256_hex(basis).substr(0, 12);
}

namespace {

struct Runner {
  const ReferenceTask& task;
  const LibraryIndex& index;
  const Config& config;
  Gateway& gateway;
  GenerationSession s;
  std::optional<ConformanceOracle> oracle;
  bool external;

  const std::string& model() const { return config.provider.model_id; }

  TranscriptEntry& call(const PromptBundle& bundle) {
    s.transcript.push_back(ask(gateway, bundle, model(), config.provider.max_tokens));
    return s.transcript.back();
  }

  std::string repair(const std::string& error_log, const std::string& source) {
    auto bundle = render(load_template("iteration"), {{"error_log", error_log}, {"code_content", source}});
    return extract_code(call(bundle).response.text);
  }

  // Returns the parsed block when the artifact passes the compile gate.
  std::optional<ModelicaBlock> compile_gate(Artifact& a) {
    ModelicaBlock block;
    try {
      block = parse(a.source);
    } catch (const SyntaxError& e) {
      a.error_log = std::string("syntax error: ") + e.what() + "\n";
      return std::nullopt;
    } catch (const Error& e) {
      a.error_log = std::string("parse error: ") + e.what() + "\n";
      return std::nullopt;
    }
    a.report = validate(block, index, &task);
    a.error_log = format_diagnostics(a.report);
    bool ok = a.report.passed;
    if (external) {
      try {
        auto r = compile_external(a.source, config.toolchain);
        if (!r.ok) a.error_log += r.log;
        ok = ok && r.ok;
      } catch (const ToolchainUnavailable& e) {
        s.notes.push_back(std::string(e.what()) + "; falling back to builtin_validator");
        external = false;
      }
    }
    if (!ok) return std::nullopt;
    a.compiled = true;
    return block;
  }

  // Runtime errors come back as a message; behavioural verdicts are kept.
  std::optional<std::string> simulate_gate(Artifact& a, const ModelicaBlock& block) {
    try {
      if (oracle) {
        auto r = check_conformance(*oracle, block, index);
        a.trace = r.trace;
        s.conformance = std::move(r);
      } else {
        auto net = elaborate(block, index);
        SimulationTrace in;
        in.step_size = config.pipeline.step_size;
        in.horizon = config.pipeline.horizon;
        auto n = in.steps();
        for (const auto& c : block.connectors) {
          if (c.direction != Direction::input) continue;
          SignalValue zero = c.kind == SignalKind::Boolean   ? SignalValue(false)
                             : c.kind == SignalKind::Integer ? SignalValue(0LL)
                                                             : SignalValue(0.0);
          in.add(c.name, Series(n, zero));
        }
        a.trace = simulate(net, in, in.step_size, in.horizon);
      }
      a.simulated = true;
      return std::nullopt;
    } catch (const Error& e) {
      a.simulated = false;
      return std::string("simulation error: ") + e.what();
    }
  }

  std::string behaviour_log() const {
    std::string log = "The module compiles and simulates, but its behaviour violates the control sequence:\n";
    for (const auto& v : s.conformance->verdicts)
      if (!v.holds) log += "- " + v.name + ": " + v.detail + "\n";
    return log;
  }

  void run() {
    const auto& p = config.pipeline;
    auto sel = select_unchecked(task, index, gateway, model(), p.fuzzy_selection, config.provider.max_tokens);
    s.transcript.push_back(sel.call);
    s.selected_modules = sel.modules;
    for (auto& n : sel.notes) s.notes.push_back(n);
    if (s.selected_modules.empty()) throw NoModulesSelected();

    std::vector<std::string> fqns;
    for (const auto& m : s.selected_modules) fqns.push_back(m.fqn);
    auto gen = render(load_template("code_generator"),
                      {{"modules", module_list(fqns)}, {"task", control_task_prompt(task)}});
    std::string source = extract_code(call(gen).response.text);

    for (;;) {
      Artifact a;
      a.iteration = static_cast<int>(s.artifacts.size()) + 1;
      a.source = source;
      ++s.counters.compile;
      auto block = compile_gate(a);
      if (!block) {
        s.artifacts.push_back(a);
        if (s.counters.compile >= p.max_compile_iters)
          return finish(SessionStatus::failed_max_iterations,
                        "compile gate still failing after " + std::to_string(p.max_compile_iters) + " iterations");
        source = repair(a.error_log, a.source);
        continue;
      }

      ++s.counters.simulate;
      auto runtime = simulate_gate(a, *block);
      if (runtime) {
        a.error_log = *runtime;
        s.artifacts.push_back(a);
        if (s.counters.simulate >= p.max_sim_iters || s.counters.compile >= p.max_compile_iters)
          return finish(SessionStatus::failed_max_iterations,
                        "simulate gate still failing after " + std::to_string(s.counters.simulate) + " iterations");
        source = repair(*runtime, a.source);
        continue;
      }
      if (s.conformance && !s.conformance->passed && p.behavioral_repair && s.counters.simulate < p.max_sim_iters &&
          s.counters.compile < p.max_compile_iters) {
        a.error_log = behaviour_log();
        s.artifacts.push_back(a);
        source = repair(a.error_log, a.source);
        continue;
      }
      if (s.conformance && !s.conformance->passed)
        s.notes.push_back("conformance oracle " + oracle->id + " failed; routed to human evaluation");
      s.artifacts.push_back(a);

      if (p.ai_eval) {
        ++s.counters.evaluate;
        auto ev = ai_evaluate(s, p.eval_pathway, gateway, model(), config.provider.max_tokens);
        s.transcript.push_back(ev.call);
        if (ev.error) s.notes.push_back("evaluator reply unparseable: " + *ev.error);
        if (ev.record.gate) s.ai_verdict = *ev.record.gate ? "yes" : "no";
        if (ev.record.gate && !*ev.record.gate && s.counters.evaluate < p.max_eval_iters &&
            s.counters.compile < p.max_compile_iters) {
          source = repair("The evaluator judged that the module does not implement the control sequence.",
                          a.source);
          continue;
        }
      }
      return finish(SessionStatus::converged, "");
    }
  }

  void finish(SessionStatus st, std::string cause) {
    s.status = st;
    s.cause = std::move(cause);
  }
};

}  // namespace

GenerationSession run_session(const ReferenceTask& task, const LibraryIndex& index, const Config& config,
                              Gateway& gateway) {
  Runner r{task, index, config, gateway, {}, std::nullopt,
           config.pipeline.compile_backend == CompileBackend::external_toolchain};
  r.s.session_id = session_id_for(task, config);
  r.s.task = task;
  r.s.config_snapshot = format_config(config);
  try {
    if (!task.oracle_id.empty()) r.oracle = make_oracle(task);
    r.run();
  } catch (const Error& e) {
    r.finish(SessionStatus::failed_unrecoverable, e.what());
  }
  return std::move(r.s);
}

std::string format_transcript(const GenerationSession& s) {
  std::ostringstream os;
  int n = 0;
  for (const auto& t : s.transcript) {
    const auto& q = t.request;
    const auto& r = t.response;
    os << "=== call " << ++n << " role=" << t.role_id << " model=" << q.model_id << " key=" << q.key() << "\n"
       << "--- system\n" << q.system_text << "\n"
       << "--- user\n" << q.user_text << "\n"
       << "--- response provider=" << r.provider << " prompt_tokens=" << r.prompt_tokens
       << " completion_tokens=" << r.completion_tokens << " latency_s=" << util::format_real(r.latency)
       << " replay=" << (r.from_replay ? "yes" : "no") << " estimated=" << (r.estimated ? "yes" : "no") << "\n"
       << r.text << "\n";
  }
  for (const auto& note : s.notes) os << "=== note\n" << note << "\n";
  return os.str();
}

std::string format_summary(const GenerationSession& s) {
  std::ostringstream os;
  auto responses = s.responses();
  long long pt = 0, ct = 0;
  std::size_t est = 0, rep = 0;
  for (const auto& r : responses) {
    pt += r.prompt_tokens;
    ct += r.completion_tokens;
    est += r.estimated;
    rep += r.from_replay;
  }
  std::vector<std::string> fqns;
  for (const auto& m : s.selected_modules) fqns.push_back(m.fqn + "|" + std::string(to_string(m.provenance)));
  os << "session_id=" << s.session_id << "\n"
     << "task_id=" << s.task.id << "\n"
     << "status=" << to_string(s.status) << "\n"
     << "cause=" << s.cause << "\n"
     << "compile_iters=" << s.counters.compile << "\n"
     << "sim_iters=" << s.counters.simulate << "\n"
     << "eval_iters=" << s.counters.evaluate << "\n"
     << "artifacts=" << s.artifacts.size() << "\n"
     << "llm_calls=" << responses.size() << "\n"
     << "prompt_tokens=" << pt << "\n"
     << "completion_tokens=" << ct << "\n"
     << "estimated_calls=" << est << "\n"
     << "replayed_calls=" << rep << "\n"
     << "selected=" << util::join(fqns, ",") << "\n"
     << "conformance=" << (s.conformance ? (s.conformance->passed ? "pass" : "fail") : "none") << "\n"
     << "ai_verdict=" << s.ai_verdict.value_or("none") << "\n";
  for (const auto& [model, m] : metrics_summary(responses)) {
    std::string k = "model." + model + ".";
    os << k << "calls=" << m.calls << "\n"
       << k << "prompt_tokens=" << m.prompt_tokens << "\n"
       << k << "completion_tokens=" << m.completion_tokens << "\n"
       << k << "mean_latency_s=" << util::format_real(m.mean_latency) << "\n";
  }
  return os.str();
}

fs::path write_session_dir(const GenerationSession& s, const fs::path& root) {
  auto dir = root / s.session_id;
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir / "artifacts");
  fs::create_directories(dir / "diagnostics");
  fs::create_directories(dir / "traces");
  util::write_file(dir / "transcript.txt", format_transcript(s));
  util::write_file(dir / "session.summary", format_summary(s));
  util::write_file(dir / "config.txt", s.config_snapshot);
  for (const auto& a : s.artifacts) {
    auto stem = "iter_" + std::to_string(a.iteration);
    util::write_file(dir / "artifacts" / (stem + ".mo"), a.source);
    util::write_file(dir / "diagnostics" / (stem + ".txt"), a.error_log);
    if (a.trace) util::write_file(dir / "traces" / (stem + ".csv"), write_trace_csv(*a.trace));
  }
  if (s.conformance) {
    std::string out;
    for (const auto& v : s.conformance->verdicts)
      out += v.name + "\t" + (v.holds ? "holds" : "violated") + "\t" + v.detail + "\n";
    util::write_file(dir / "conformance.txt", out);
  }
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  ::gmtime_r(&now, &tm);
  std::ostringstream ts;
  ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << "\n";
  util::write_file(dir / "timestamp", ts.str());
  return dir;
}

}  // namespace cdlgen
