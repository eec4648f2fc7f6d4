#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cdlgen/config.hpp"
#include "cdlgen/error.hpp"
#include "cdlgen/orchestrator.hpp"
#include "test_support.hpp"

using namespace cdlgen;
using cdlgen::testing::data_dir;
using cdlgen::testing::fixture;
using cdlgen::testing::scratch_dir;
using cdlgen::testing::shipped_index;
using cdlgen::testing::slurp;
namespace fs = std::filesystem;

namespace {

fs::path repo_root() { return data_dir().parent_path(); }

std::string fenced(const std::string& code) { return "```modelica\n" + code + "```\n"; }

std::string misspelled_task4() {
  auto src = fixture("Task4.mo");
  auto at = src.find("Logical.TrueDelay truDel3K");
  src.replace(at, std::string("Logical.TrueDelay").size(), "Logical.TrueDelays");
  return src;
}

Config scripted_config() {
  Config c;
  c.provider.model_id = "test-model";
  c.provider.auth_env_var.clear();
  c.mode = GatewayMode::live;
  return c;
}

struct Scripted {
  std::shared_ptr<ScriptedProvider> provider;
  Gateway gateway;
  explicit Scripted(std::vector<std::string> replies)
      : provider(std::make_shared<ScriptedProvider>(std::move(replies))), gateway(Gateway::live(provider)) {}
};

std::size_t role_count(const GenerationSession& s, const std::string& role) {
  std::size_t n = 0;
  for (const auto& t : s.transcript) n += t.role_id == role;
  return n;
}

// Responses are 1 selection + 1 generation + one per repair + evaluator calls.
void expect_transcript_complete(const GenerationSession& s) {
  ASSERT_FALSE(s.artifacts.empty());
  std::size_t repairs = s.artifacts.size() - 1;
  EXPECT_EQ(s.responses().size(), 2 + repairs + static_cast<std::size_t>(s.counters.evaluate));
  EXPECT_EQ(static_cast<int>(s.artifacts.size()), s.counters.compile);
}

const char* kLoopTask =
    "id=loop\n"
    "title=Doubler\n"
    "goal=generate a Modelica control block that doubles its input\n"
    "input=u|Real||Input signal\n"
    "output=y|Real||Twice the input\n"
    "rule=Set y to the sum of u with itself\n";

const char* kLoopBlock =
    "block Doubler\n"
    "  Buildings.Controls.OBC.CDL.Interfaces.RealInput u;\n"
    "  Buildings.Controls.OBC.CDL.Interfaces.RealOutput y;\n"
    "  Buildings.Controls.OBC.CDL.Reals.Add add;\n"
    "equation\n"
    "  connect(u, add.u1);\n"
    "  connect(add.y, add.u2);\n"
    "  connect(add.y, y);\n"
    "end Doubler;\n";

const char* kFixedBlock =
    "block Doubler\n"
    "  Buildings.Controls.OBC.CDL.Interfaces.RealInput u;\n"
    "  Buildings.Controls.OBC.CDL.Interfaces.RealOutput y;\n"
    "  Buildings.Controls.OBC.CDL.Reals.Add add;\n"
    "equation\n"
    "  connect(u, add.u1);\n"
    "  connect(u, add.u2);\n"
    "  connect(add.y, y);\n"
    "end Doubler;\n";

}  // namespace

TEST(BulletNames, StripsGlyphsNumberingAndMarkup) {
  auto names = parse_bullet_names(
      "- And\n* `Or`\n\xE2\x80\xA2 **Not**\n1. Switch\n2) TrueDelay.\n  - Hysteresis, Latch\n\nHere you go\n");
  std::vector<std::string> want = {"And", "Or", "Not", "Switch", "TrueDelay", "Hysteresis", "Latch"};
  EXPECT_EQ(names, want);
}

TEST(SelectModules, ResolvesEveryNameByHardRule) {
  Scripted sc({"- And, GreaterThreshold\n"});
  auto r = select_modules(load_task("1"), shipped_index(), sc.gateway, "m");
  ASSERT_EQ(r.modules.size(), 2u);
  EXPECT_EQ(r.modules[0].fqn, "Buildings.Controls.OBC.CDL.Logical.And");
  EXPECT_EQ(r.modules[1].fqn, "Buildings.Controls.OBC.CDL.Reals.GreaterThreshold");
  for (const auto& m : r.modules) EXPECT_EQ(m.provenance, Provenance::hard_rule);
  EXPECT_EQ(r.call.role_id, "control_expert");
}

TEST(SelectModules, UnknownNamesAreDroppedWithANote) {
  Scripted sc({"- And\n- FooBar\n"});
  auto r = select_modules(load_task("1"), shipped_index(), sc.gateway, "m");
  ASSERT_EQ(r.modules.size(), 1u);
  ASSERT_EQ(r.notes.size(), 1u);
  EXPECT_NE(r.notes[0].find("FooBar"), std::string::npos);

  Scripted none({"- FooBar\n"});
  EXPECT_THROW(select_modules(load_task("1"), shipped_index(), none.gateway, "m"), NoModulesSelected);
}

TEST(SelectModules, FuzzyProvenanceIsRecorded) {
  Scripted sc({"- Or\n"});
  auto r = select_modules(load_task("1"), shipped_index(), sc.gateway, "m", true);
  ASSERT_FALSE(r.modules.empty());
  EXPECT_EQ(r.modules[0].provenance, Provenance::fuzzy);
  EXPECT_EQ(r.modules[0].requested, "Or");
}

TEST(RunSession, ShippedCassetteConvergesInTwoCompileIterations) {
  auto config = load_config(repo_root() / "ci.cfg");
  config.check();
  auto gateway = Gateway::replay(std::make_shared<const Cassette>(Cassette::load(*config.cassette)));
  auto s = run_session(load_task("4"), shipped_index(), config, gateway);
  EXPECT_EQ(s.status, SessionStatus::converged) << s.cause;
  EXPECT_EQ(s.counters.compile, 2);
  EXPECT_EQ(s.counters.simulate, 1);
  ASSERT_EQ(s.transcript.size(), 3u);
  EXPECT_EQ(s.transcript[0].role_id, "control_expert");
  EXPECT_EQ(s.transcript[1].role_id, "code_generator");
  EXPECT_EQ(s.transcript[2].role_id, "iteration_evaluator");
  EXPECT_TRUE(s.artifacts[0].report.has(FaultClass::unknown_class));
  EXPECT_FALSE(s.artifacts[0].simulated.has_value());
  EXPECT_TRUE(s.artifacts[1].compiled);
  ASSERT_TRUE(s.conformance);
  EXPECT_TRUE(s.conformance->passed);
  EXPECT_EQ(gateway.outbound_calls(), 0u);
  for (const auto& r : s.responses()) EXPECT_TRUE(r.from_replay);
  expect_transcript_complete(s);
}

TEST(RunSession, ReplayWritesIdenticalSessionDirectories) {
  auto config = load_config(repo_root() / "ci.cfg");
  auto cassette = std::make_shared<const Cassette>(Cassette::load(*config.cassette));
  std::vector<fs::path> dirs;
  for (const char* run : {"a", "b"}) {
    auto gateway = Gateway::replay(cassette);
    auto s = run_session(load_task("4"), shipped_index(), config, gateway);
    dirs.push_back(write_session_dir(s, scratch_dir(std::string("replay_") + run)));
  }
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(dirs[0])) {
    if (!e.is_regular_file() || e.path().filename() == "timestamp") continue;
    auto rel = fs::relative(e.path(), dirs[0]);
    ASSERT_TRUE(fs::exists(dirs[1] / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(dirs[1] / rel)) << rel;
    ++compared;
  }
  EXPECT_GE(compared, 8u);
  EXPECT_TRUE(fs::exists(dirs[0] / "timestamp"));
}

TEST(RunSession, RepairsThatNeverFixStopAtTheBound) {
  auto broken = fenced(misspelled_task4());
  Scripted sc({"- TrueDelay\n", broken, broken, broken, broken});
  auto config = scripted_config();
  auto s = run_session(load_task("4"), shipped_index(), config, sc.gateway);
  EXPECT_EQ(s.status, SessionStatus::failed_max_iterations);
  EXPECT_EQ(s.artifacts.size(), 3u);
  EXPECT_EQ(s.counters.compile, 3);
  EXPECT_EQ(sc.provider->calls(), 4u);
  for (const auto& a : s.artifacts) EXPECT_FALSE(a.simulated.has_value());
  expect_transcript_complete(s);
}

TEST(RunSession, EvaluatorRoleOnlyWhenEnabled) {
  auto good = fenced(fixture("Task4.mo"));
  auto config = scripted_config();
  Scripted off({"- TrueDelay\n", good});
  auto s_off = run_session(load_task("4"), shipped_index(), config, off.gateway);
  EXPECT_EQ(s_off.status, SessionStatus::converged);
  EXPECT_EQ(role_count(s_off, "evaluator"), 0u);
  EXPECT_EQ(s_off.counters.evaluate, 0);

  config.pipeline.ai_eval = true;
  Scripted on({"- TrueDelay\n", good, "Yes."});
  auto s_on = run_session(load_task("4"), shipped_index(), config, on.gateway);
  EXPECT_EQ(s_on.status, SessionStatus::converged);
  EXPECT_EQ(role_count(s_on, "evaluator"), 1u);
  EXPECT_EQ(s_on.ai_verdict, "yes");
  expect_transcript_complete(s_on);

  config.pipeline.eval_pathway = EvalPathway::code_based;
  Scripted vague({"- TrueDelay\n", good, "The module looks correct"});
  auto s_vague = run_session(load_task("4"), shipped_index(), config, vague.gateway);
  EXPECT_EQ(s_vague.status, SessionStatus::converged);
  EXPECT_FALSE(s_vague.ai_verdict.has_value());
  EXPECT_NE(s_vague.notes.back().find("unparseable"), std::string::npos);
}

TEST(RunSession, RuntimeErrorsGoThroughTheSimulateLoop) {
  auto task = parse_task(kLoopTask);
  Scripted sc({"- Add\n", fenced(kLoopBlock), fenced(kFixedBlock)});
  auto config = scripted_config();
  auto s = run_session(task, shipped_index(), config, sc.gateway);
  EXPECT_EQ(s.status, SessionStatus::converged) << s.cause;
  EXPECT_EQ(s.counters.compile, 2);
  EXPECT_EQ(s.counters.simulate, 2);
  ASSERT_EQ(s.artifacts.size(), 2u);
  EXPECT_TRUE(s.artifacts[0].compiled);
  EXPECT_EQ(s.artifacts[0].simulated, false);
  EXPECT_NE(s.artifacts[0].error_log.find("simulation error"), std::string::npos);
  EXPECT_NE(s.transcript[2].request.user_text.find(s.artifacts[0].error_log), std::string::npos);
  EXPECT_FALSE(s.conformance.has_value());
  expect_transcript_complete(s);

  config.pipeline.max_sim_iters = 1;
  Scripted once({"- Add\n", fenced(kLoopBlock)});
  auto f = run_session(task, shipped_index(), config, once.gateway);
  EXPECT_EQ(f.status, SessionStatus::failed_max_iterations);
  EXPECT_EQ(f.counters.simulate, 1);
}

TEST(RunSession, BehaviouralFailuresDoNotLoopByDefault) {
  auto src = slurp(data_dir() / "reference" / "Task1Ref.mo");
  auto block = parse(src);
  // enabling straight at the setpoint passes every static rule but toggles
  // inside the deadband
  for (auto& inst : block.instances)
    if (inst.name == "aboBan")
      for (auto& m : inst.modifiers)
        if (m.name == "t") m.value = "0";
  auto mutant = print(block);
  auto config = scripted_config();
  Scripted sc({"- GreaterThreshold\n", fenced(mutant)});
  auto s = run_session(load_task("1"), shipped_index(), config, sc.gateway);
  EXPECT_EQ(s.status, SessionStatus::converged) << s.cause;
  ASSERT_TRUE(s.conformance);
  EXPECT_FALSE(s.conformance->passed);
  EXPECT_EQ(s.artifacts.size(), 1u);
  EXPECT_NE(s.notes.back().find("human evaluation"), std::string::npos);

  config.pipeline.behavioral_repair = true;
  Scripted rep({"- GreaterThreshold\n", fenced(mutant), fenced(src)});
  auto r = run_session(load_task("1"), shipped_index(), config, rep.gateway);
  EXPECT_EQ(r.status, SessionStatus::converged) << r.cause;
  ASSERT_EQ(r.artifacts.size(), 2u);
  EXPECT_TRUE(r.conformance->passed);
  EXPECT_NE(r.artifacts[0].error_log.find("hold_inside_deadband"), std::string::npos);
  expect_transcript_complete(r);
}

TEST(RunSession, UnrecoverableConditionsRecordTheCause) {
  auto config = scripted_config();
  Scripted nothing({"- FooBar\n"});
  auto a = run_session(load_task("1"), shipped_index(), config, nothing.gateway);
  EXPECT_EQ(a.status, SessionStatus::failed_unrecoverable);
  EXPECT_NE(a.cause.find("no selected module"), std::string::npos);
  EXPECT_EQ(a.transcript.size(), 1u);

  Scripted empty({"- And\n", "```\n\n```\n"});
  auto b = run_session(load_task("1"), shipped_index(), config, empty.gateway);
  EXPECT_EQ(b.status, SessionStatus::failed_unrecoverable);
  EXPECT_NE(b.cause.find("no code"), std::string::npos);

  auto replay = Gateway::replay(std::make_shared<const Cassette>());
  auto c = run_session(load_task("1"), shipped_index(), config, replay);
  EXPECT_EQ(c.status, SessionStatus::failed_unrecoverable);
  EXPECT_TRUE(c.transcript.empty());
}

TEST(RunSession, SessionIdIsStableAndIgnoresGatewayMode) {
  auto config = scripted_config();
  auto id = session_id_for(load_task("4"), config);
  EXPECT_EQ(id.rfind("task4-", 0), 0u);
  config.mode = GatewayMode::replay;
  EXPECT_EQ(session_id_for(load_task("4"), config), id);
  config.pipeline.max_compile_iters = 5;
  EXPECT_NE(session_id_for(load_task("4"), config), id);
  EXPECT_NE(session_id_for(load_task("3"), scripted_config()), id);
}

namespace {

fs::path stub(const fs::path& dir, const std::string& name, const std::string& body) {
  auto p = dir / name;
  std::ofstream(p) << "#!/bin/sh\n" << body;
  fs::permissions(p, fs::perms::owner_all);
  return p;
}

}  // namespace

TEST(CompileExternal, StubToolchains) {
  auto dir = scratch_dir("toolchain");
  ToolchainConfig tc;
  tc.timeout_s = 10;

  tc.command = stub(dir, "ok.sh", "grep -q checkModel \"$1\" || exit 3\necho 'Check of Task4 completed successfully.'\n");
  auto ok = compile_external(fixture("Task4.mo"), tc);
  EXPECT_TRUE(ok.ok) << ok.log;

  const std::string log = "[Task4.mo:12:3-12:40] Error: Class Foo not found in scope Task4.\n";
  tc.command = stub(dir, "err.sh", "printf '%s\\n' '" + log.substr(0, log.size() - 1) + "'\n");
  auto bad = compile_external(fixture("Task4.mo"), tc);
  EXPECT_FALSE(bad.ok);
  EXPECT_EQ(bad.log, log);

  tc.command = stub(dir, "fail.sh", "echo broken\nexit 1\n");
  EXPECT_FALSE(compile_external(fixture("Task4.mo"), tc).ok);

  tc.script_template_path = dir / "script.mos";
  std::ofstream(tc.script_template_path) << "load {source_path} as {model_name}\n";
  tc.command = stub(dir, "cat.sh", "cat \"$1\"\n");
  auto rendered = compile_external(fixture("Task4.mo"), tc);
  EXPECT_NE(rendered.log.find("as Task4"), std::string::npos);
  EXPECT_NE(rendered.log.find("Task4.mo"), std::string::npos);

  tc.command = (dir / "absent.sh").string();
  EXPECT_THROW(compile_external("block A end A;", tc), ToolchainUnavailable);
  tc.command = "cdlgen-no-such-toolchain";
  EXPECT_THROW(compile_external("block A end A;", tc), ToolchainUnavailable);
}

TEST(CompileExternal, MissingToolchainFallsBackToTheValidator) {
  auto config = scripted_config();
  config.pipeline.compile_backend = CompileBackend::external_toolchain;
  config.toolchain.command = "cdlgen-no-such-toolchain";
  Scripted sc({"- TrueDelay\n", fenced(fixture("Task4.mo"))});
  auto s = run_session(load_task("4"), shipped_index(), config, sc.gateway);
  EXPECT_EQ(s.status, SessionStatus::converged);
  ASSERT_FALSE(s.notes.empty());
  EXPECT_NE(s.notes[0].find("falling back to builtin_validator"), std::string::npos);
}

TEST(CompileExternal, ToolchainErrorsFeedTheRepairPrompt) {
  auto dir = scratch_dir("toolchain_loop");
  auto config = scripted_config();
  config.pipeline.compile_backend = CompileBackend::external_toolchain;
  // fails the first check only
  config.toolchain.command =
      stub(dir, "once.sh", "if [ -f " + (dir / "seen").string() + " ]; then exit 0; fi\ntouch " +
                               (dir / "seen").string() + "\necho 'Error: simulated toolchain failure'\n")
          .string();
  auto good = fenced(fixture("Task4.mo"));
  Scripted sc({"- TrueDelay\n", good, good});
  auto s = run_session(load_task("4"), shipped_index(), config, sc.gateway);
  EXPECT_EQ(s.status, SessionStatus::converged);
  EXPECT_EQ(s.counters.compile, 2);
  EXPECT_NE(s.transcript[2].request.user_text.find("simulated toolchain failure"), std::string::npos);
}

TEST(SessionDir, LayoutAndSummary) {
  auto good = fenced(fixture("Task4.mo"));
  Scripted sc({"- TrueDelay\n", good});
  auto s = run_session(load_task("4"), shipped_index(), scripted_config(), sc.gateway);
  auto dir = write_session_dir(s, scratch_dir("layout"));
  for (const char* f : {"transcript.txt", "session.summary", "config.txt", "conformance.txt", "timestamp",
                        "artifacts/iter_1.mo", "diagnostics/iter_1.txt", "traces/iter_1.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  auto summary = slurp(dir / "session.summary");
  EXPECT_NE(summary.find("status=converged\n"), std::string::npos);
  EXPECT_NE(summary.find("llm_calls=2\n"), std::string::npos);
  EXPECT_EQ(slurp(dir / "artifacts/iter_1.mo"), s.artifacts[0].source);
  EXPECT_EQ(s.artifacts[0].source + "\n", fixture("Task4.mo"));
  // rerunning replaces the directory
  write_session_dir(s, dir.parent_path());
  EXPECT_TRUE(fs::exists(dir / "session.summary"));
}

TEST(Config, ParsesSectionsAndResolvesPaths) {
  auto c = parse_config(
      "# comment\n[library]\nindex = data/fixtures.idx\n[provider]\npreset = anthropic\nmodel_id = m1\n"
      "[pipeline]\nmax_compile_iters=4\nai_eval=on\neval_pathway=code_based\nselection=fuzzy\n"
      "[gateway]\nmode=record\ncassette=c.cassette\n[output]\ndir=out\n",
      "/base");
  EXPECT_EQ(c.index_path, fs::path("/base/data/fixtures.idx"));
  EXPECT_EQ(c.provider.name, "anthropic");
  EXPECT_EQ(c.provider.model_id, "m1");
  EXPECT_EQ(c.pipeline.max_compile_iters, 4);
  EXPECT_TRUE(c.pipeline.ai_eval);
  EXPECT_EQ(c.pipeline.eval_pathway, EvalPathway::code_based);
  EXPECT_TRUE(c.pipeline.fuzzy_selection);
  EXPECT_EQ(c.mode, GatewayMode::record);
  EXPECT_EQ(*c.cassette, fs::path("/base/c.cassette"));
  EXPECT_EQ(c.output_dir, fs::path("/base/out"));
  EXPECT_EQ(parse_config("", "/b").output_dir, fs::path("/b/sessions"));
}

TEST(Config, RejectsUnknownKeysAndInlineSecrets) {
  EXPECT_THROW(parse_config("[pipeline]\nmax_iters=3\n", "/"), ConfigError);
  EXPECT_THROW(parse_config("[provider]\napi_key=sk-123\n", "/"), ConfigError);
  EXPECT_THROW(parse_config("[provider]\ntoken=abc\n", "/"), ConfigError);
  EXPECT_THROW(parse_config("[pipeline]\nmax_compile_iters=0\n", "/"), ConfigError);
  EXPECT_THROW(parse_config("[pipeline]\nai_eval=maybe\n", "/"), ConfigError);
  EXPECT_THROW(parse_config("[gateway]\nmode=offline\n", "/"), ConfigError);
  EXPECT_THROW(parse_config("[library\n", "/"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/cdlgen.cfg"), ConfigError);
}

TEST(Config, CheckEnforcesModeRequirements) {
  Config c;
  c.mode = GatewayMode::replay;
  EXPECT_THROW(c.check(), ConfigError);
  c.cassette = "/nonexistent.cassette";
  EXPECT_THROW(c.check(), ConfigError);
  c.cassette = data_dir() / "cassettes" / "task4.cassette";
  EXPECT_NO_THROW(c.check());

  c.mode = GatewayMode::live;
  c.provider.auth_env_var = "CDLGEN_TEST_UNSET_VARIABLE";
  ::unsetenv("CDLGEN_TEST_UNSET_VARIABLE");
  EXPECT_THROW(c.check(), ConfigError);
  ::setenv("CDLGEN_TEST_UNSET_VARIABLE", "secret-value", 1);
  EXPECT_NO_THROW(c.check());
  // the snapshot names the variable and never holds its value
  auto snap = format_config(c);
  EXPECT_NE(snap.find("CDLGEN_TEST_UNSET_VARIABLE"), std::string::npos);
  EXPECT_EQ(snap.find("secret-value"), std::string::npos);
  ::unsetenv("CDLGEN_TEST_UNSET_VARIABLE");

  c.pipeline.compile_backend = CompileBackend::external_toolchain;
  c.mode = GatewayMode::replay;
  EXPECT_THROW(c.check(), ConfigError);
}
