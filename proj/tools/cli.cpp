#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "cdlgen/config.hpp"
#include "cdlgen/error.hpp"
#include "cdlgen/evaluation.hpp"
#include "cdlgen/interpreter.hpp"
#include "cdlgen/library_index.hpp"
#include "cdlgen/oracle.hpp"
#include "cdlgen/orchestrator.hpp"
#include "cdlgen/validator.hpp"

namespace cdlgen {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

LibraryIndex open_index(const std::string& path, const std::string& renames) {
  auto idx = load_index_file(path);
  if (!renames.empty()) idx.set_renames(load_rename_map(renames));
  return idx;
}

LibraryIndex index_from_config(const Config& c) {
  LibraryIndex idx;
  if (!c.index_path.empty())
    idx = load_index_file(c.index_path);
  else if (!c.library_root.empty())
    idx = build_index(c.library_root, c.library_version).index;
  else
    throw ConfigError("config needs [library] index or root");
  if (!c.rename_map.empty()) idx.set_renames(load_rename_map(c.rename_map));
  return idx;
}

Gateway make_gateway(const Config& c) {
  switch (c.mode) {
    case GatewayMode::replay:
      return Gateway::replay(std::make_shared<const Cassette>(Cassette::load(*c.cassette)));
    case GatewayMode::record: {
      auto cas = std::make_shared<Cassette>(fs::exists(*c.cassette) ? Cassette::load(*c.cassette)
                                                                    : Cassette(c.cassette->stem().string()));
      return Gateway::record(std::make_shared<HttpProvider>(c.provider), cas, *c.cassette);
    }
    case GatewayMode::live:
      break;
  }
  return Gateway::live(std::make_shared<HttpProvider>(c.provider));
}

// Enough of a session directory to pre-fill a review form.
GenerationSession read_session_dir(const fs::path& dir) {
  GenerationSession s;
  auto summary = slurp(dir / "session.summary");
  std::istringstream in(summary);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "session_id") s.session_id = v;
    if (k == "task_id") s.task.id = v;
    if (k == "status") s.status = session_status_from(v).value_or(SessionStatus::failed_unrecoverable);
  }
  for (int i = 1; fs::exists(dir / "artifacts" / ("iter_" + std::to_string(i) + ".mo")); ++i) {
    Artifact a;
    a.iteration = i;
    a.source = slurp(dir / "artifacts" / ("iter_" + std::to_string(i) + ".mo"));
    s.artifacts.push_back(std::move(a));
  }
  return s;
}

struct Flags {
  std::string index, renames, task, file, inputs, out, config, mode, name, root, version, dir, form;
  std::vector<std::string> tasks;
  bool fuzzy = false;
  std::size_t k = 5;
  double step = 10, horizon = 3600;
  int jobs = 1;
  double baseline = 0, assisted = 0, rate = 0;
  std::size_t modules = 1;
};

int cmd_index(const Flags& f, std::ostream& out, std::ostream& err) {
  try {
    auto b = build_index(f.root, f.version);
    for (const auto& w : b.warnings) err << "warning: " << w.source_path << ": " << w.message << "\n";
    write_index_file(b.index, f.root, f.out);
    out << b.index.entries().size() << " entries written to " << f.out << "\n";
    return 0;
  } catch (const EmptyIndex& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_lookup(const Flags& f, std::ostream& out) {
  auto idx = open_index(f.index, f.renames);
  auto r = f.fuzzy ? baseline_fuzzy_search(idx, f.name, f.k) : hard_rule_lookup(idx, f.name);
  for (const auto& h : r.hits) {
    out << h.fqn;
    if (f.fuzzy) out << "\t" << h.score;
    out << "\n";
  }
  return r.found() ? 0 : 1;
}

int cmd_validate(const Flags& f, std::ostream& out) {
  auto idx = open_index(f.index, f.renames);
  auto block = parse(slurp(f.file));
  std::optional<ReferenceTask> task;
  if (!f.task.empty()) task = load_task(f.task);
  auto report = validate(block, idx, task ? &*task : nullptr);
  out << format_diagnostics(report);
  return report.passed ? 0 : 1;
}

int cmd_simulate(const Flags& f, std::ostream& out) {
  auto idx = open_index(f.index, f.renames);
  auto block = parse(slurp(f.file));
  auto net = elaborate(block, idx);
  std::map<std::string, SignalKind> kinds{{"time_s", SignalKind::Real}};
  for (const auto& c : block.connectors)
    if (c.direction == Direction::input) kinds[c.name] = c.kind;
  auto inputs = read_trace_csv(slurp(f.inputs), kinds);
  auto trace = simulate(net, inputs, f.step, f.horizon);
  auto csv = write_trace_csv(trace);
  if (f.out.empty())
    out << csv;
  else
    spill(f.out, csv);
  return 0;
}

int cmd_conform(const Flags& f, std::ostream& out) {
  auto idx = open_index(f.index, f.renames);
  auto block = parse(slurp(f.file));
  auto task = load_task(f.task);
  auto r = check_conformance(make_oracle(task), block, idx);
  for (const auto& v : r.verdicts)
    out << v.name << "\t" << (v.holds ? "holds" : "violated") << (v.detail.empty() ? "" : "\t" + v.detail) << "\n";
  out << (r.passed ? "PASS" : "FAIL") << "\n";
  if (!f.out.empty()) spill(f.out, write_trace_csv(r.trace));
  return r.passed ? 0 : 1;
}

int cmd_generate(const Flags& f, std::ostream& out, std::ostream& err) {
  auto config = load_config(f.config);
  if (!f.mode.empty()) {
    auto m = gateway_mode_from(f.mode);
    if (!m) throw ConfigError("--mode must be live, replay or record");
    config.mode = *m;
  }
  if (!f.out.empty()) config.output_dir = fs::absolute(f.out);
  config.check();
  auto index = index_from_config(config);
  auto gateway = make_gateway(config);

  std::vector<ReferenceTask> tasks;
  for (const auto& t : f.tasks) tasks.push_back(load_task(t));
  std::vector<GenerationSession> sessions(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < tasks.size();) sessions[i] = run_session(tasks[i], index, config, gateway);
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::min<int>(f.jobs, static_cast<int>(tasks.size())); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  bool all = true;
  for (const auto& s : sessions) {
    auto dir = write_session_dir(s, config.output_dir);
    out << s.session_id << "\t" << to_string(s.status) << "\t" << dir.string() << "\n";
    if (!s.cause.empty()) err << s.session_id << ": " << s.cause << "\n";
    all = all && s.status == SessionStatus::converged;
  }
  return all ? 0 : 1;
}

int cmd_eval_form(const Flags& f, std::ostream& out) {
  auto form = human_eval_form(read_session_dir(f.dir));
  if (f.out.empty())
    out << form;
  else
    spill(f.out, form);
  return 0;
}

int cmd_eval_ingest(const Flags& f, std::ostream& out, std::ostream& err) {
  try {
    auto r = ingest_human_eval(slurp(f.form));
    out << format_record(r);
    auto s = r.score();
    out << "# score=" << (s ? std::to_string(*s) : "none") << "\n";
    return 0;
  } catch (const FormInvalid& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_eval_report(const Flags& f, std::ostream& out) {
  auto in = load_report_inputs(f.dir);
  auto rep = aggregate_report(in.records, in.sessions);
  out << format_report(rep);
  if (!f.out.empty()) spill(f.out, report_csv(rep));
  return 0;
}

int cmd_eval_cost(const Flags& f, std::ostream& out) {
  auto c = cost_benefit(f.baseline, f.assisted, f.rate, f.modules);
  char buf[256];
  std::snprintf(buf, sizeof buf, "savings per module: %.2f\nsavings percent: %.1f%%\nportfolio savings (%zu modules): %.2f\n",
                c.savings_per_module, c.savings_percent, c.modules, c.portfolio_savings);
  out << buf;
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grounded generation and checking of CDL control blocks", "cdlgen"};
  app.require_subcommand(1);
  Flags f;

  auto* index = app.add_subcommand("index", "Build an index file from a library tree");
  index->add_option("root", f.root, "Library root directory")->required()->check(CLI::ExistingDirectory);
  index->add_option("--version", f.version, "Library version tag")->required();
  index->add_option("-o,--output", f.out, "Index file to write")->required();

  auto* lookup = app.add_subcommand("lookup", "Find library classes by name");
  lookup->add_option("name", f.name, "Class name, unqualified or fully qualified")->required();
  lookup->add_option("--index", f.index, "Index file")->required()->check(CLI::ExistingFile);
  lookup->add_option("--renames", f.renames, "Rename map")->check(CLI::ExistingFile);
  lookup->add_flag("--fuzzy", f.fuzzy, "Use the token-overlap baseline instead of exact lookup");
  lookup->add_option("-k", f.k, "Number of fuzzy hits")->check(CLI::PositiveNumber);

  auto* val = app.add_subcommand("validate", "Run the static rules on a Modelica file");
  val->add_option("file", f.file, "Modelica source")->required()->check(CLI::ExistingFile);
  val->add_option("--index", f.index, "Index file")->required()->check(CLI::ExistingFile);
  val->add_option("--renames", f.renames, "Rename map")->check(CLI::ExistingFile);
  val->add_option("--task", f.task, "Task id 1-5 or task file, enables interface and direction checks");

  auto* sim = app.add_subcommand("simulate", "Simulate a block on an input trace");
  sim->add_option("file", f.file, "Modelica source")->required()->check(CLI::ExistingFile);
  sim->add_option("--index", f.index, "Index file")->required()->check(CLI::ExistingFile);
  sim->add_option("--renames", f.renames, "Rename map")->check(CLI::ExistingFile);
  sim->add_option("--inputs", f.inputs, "Input trace CSV")->required()->check(CLI::ExistingFile);
  sim->add_option("--step", f.step, "Step size in seconds")->check(CLI::PositiveNumber);
  sim->add_option("--horizon", f.horizon, "Horizon in seconds")->check(CLI::NonNegativeNumber);
  sim->add_option("-o,--output", f.out, "Trace CSV to write (default standard output)");

  auto* gen = app.add_subcommand("generate", "Run generation sessions");
  gen->add_option("--task", f.tasks, "Task id 1-5 or task file; repeatable")->required();
  gen->add_option("--config", f.config, "Config file")->required()->check(CLI::ExistingFile);
  gen->add_option("--mode", f.mode, "live, replay or record (overrides the config)");
  gen->add_option("--jobs", f.jobs, "Sessions run in parallel")->check(CLI::PositiveNumber);
  gen->add_option("-o,--output", f.out, "Session root directory (overrides the config)");

  auto* conf = app.add_subcommand("conform", "Check a block against its task oracle");
  conf->add_option("file", f.file, "Modelica source")->required()->check(CLI::ExistingFile);
  conf->add_option("--task", f.task, "Task id 1-5 or task file")->required();
  conf->add_option("--index", f.index, "Index file")->required()->check(CLI::ExistingFile);
  conf->add_option("--renames", f.renames, "Rename map")->check(CLI::ExistingFile);
  conf->add_option("-o,--output", f.out, "Write the probe trace CSV here");

  auto* eval = app.add_subcommand("eval", "Human and aggregate evaluation");
  eval->require_subcommand(1);
  auto* form = eval->add_subcommand("form", "Print a review form for a session directory");
  form->add_option("session", f.dir, "Session directory")->required()->check(CLI::ExistingDirectory);
  form->add_option("-o,--output", f.out, "Form file to write");
  auto* ingest = eval->add_subcommand("ingest", "Check a filled review form");
  ingest->add_option("form", f.form, "Form file")->required()->check(CLI::ExistingFile);
  auto* report = eval->add_subcommand("report", "Aggregate sessions and forms below a directory");
  report->add_option("dir", f.dir, "Directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--csv", f.out, "Per-session CSV to write");
  auto* cost = eval->add_subcommand("cost", "Labour savings of assisted authoring");
  cost->add_option("--baseline", f.baseline, "Manual hours per module")->required()->check(CLI::NonNegativeNumber);
  cost->add_option("--assisted", f.assisted, "Assisted hours per module")->required()->check(CLI::NonNegativeNumber);
  cost->add_option("--rate", f.rate, "Labour rate per hour")->required()->check(CLI::NonNegativeNumber);
  cost->add_option("--modules", f.modules, "Module count")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 64;
  }

  try {
    if (*index) return cmd_index(f, out, err);
    if (*lookup) return cmd_lookup(f, out);
    if (*val) return cmd_validate(f, out);
    if (*sim) return cmd_simulate(f, out);
    if (*gen) return cmd_generate(f, out, err);
    if (*conf) return cmd_conform(f, out);
    if (*form) return cmd_eval_form(f, out);
    if (*ingest) return cmd_eval_ingest(f, out, err);
    if (*report) return cmd_eval_report(f, out);
    if (*cost) return cmd_eval_cost(f, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 64;
}

}  // namespace cdlgen
