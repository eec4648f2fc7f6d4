#include <gtest/gtest.h>

#include <algorithm>

#include "cdlgen/error.hpp"
#include "cdlgen/task.hpp"
#include "cdlgen/validator.hpp"
#include "test_support.hpp"

using namespace cdlgen;
using cdlgen::testing::fixture;
using cdlgen::testing::reference;
using cdlgen::testing::shipped_index;

namespace {

const std::string kCdl = "Buildings.Controls.OBC.CDL.";

ModelicaBlock corpus(const std::string& name) {
  if (name == "Task4" || name == "PlantRequests") return parse(fixture(name + ".mo"));
  return reference(name);
}

// Two-input block with one And instance; connects are appended per test.
ModelicaBlock and_block() {
  return parse(R"(block B
  Buildings.Controls.OBC.CDL.Interfaces.BooleanInput a;
  Buildings.Controls.OBC.CDL.Interfaces.BooleanInput b;
  Buildings.Controls.OBC.CDL.Interfaces.RealInput r;
  Buildings.Controls.OBC.CDL.Interfaces.BooleanOutput y;
  Buildings.Controls.OBC.CDL.Logical.And and1;
equation
  connect(a, and1.u1);
  connect(b, and1.u2);
  connect(and1.y, y);
end B;)");
}

}  // namespace

TEST(Validator, FaultClassNamesRoundTrip) {
  for (int i = 0; i < 8; ++i) {
    auto f = static_cast<FaultClass>(i);
    EXPECT_EQ(fault_class_from(to_string(f)), f);
  }
  EXPECT_FALSE(fault_class_from("typo").has_value());
}

TEST(Validator, CleanCorpusHasNoErrors) {
  for (const auto* name : {"Task1Ref", "Task2Ref", "Task3Ref", "Task4Ref", "Task5Ref", "Task4", "PlantRequests"}) {
    auto r = validate(corpus(name), shipped_index());
    EXPECT_TRUE(r.passed) << name << "\n" << format_diagnostics(r);
    EXPECT_EQ((std::vector<std::string>{"R1", "R2", "R3", "R4", "R5"}), r.checked_rules);
  }
}

TEST(Validator, ReferencesPassAgainstTheirTasks) {
  for (int t = 1; t <= 5; ++t) {
    auto task = load_task(std::to_string(t));
    auto r = validate(reference("Task" + std::to_string(t) + "Ref"), shipped_index(), &task);
    EXPECT_TRUE(r.passed) << t << "\n" << format_diagnostics(r);
    EXPECT_NE(std::find(r.checked_rules.begin(), r.checked_rules.end(), "R6"), r.checked_rules.end());
    bool probed = std::find(r.checked_rules.begin(), r.checked_rules.end(), "R7") != r.checked_rules.end();
    EXPECT_EQ(probed, task.polarity.has_value()) << t;
  }
}

TEST(Validator, VersionDriftIsAWarningWithSuggestion) {
  auto b = parse(fixture("Task4.mo"));
  for (auto& inst : b.instances)
    if (inst.class_ref.str() == kCdl + "Reals.Subtract") inst.class_ref = QualifiedName::parse(kCdl + "Continuous.Subtract");
  auto r = validate(b, shipped_index());
  EXPECT_TRUE(r.passed) << format_diagnostics(r);
  ASSERT_EQ(1u, r.diagnostics.size()) << format_diagnostics(r);
  const auto& d = r.diagnostics[0];
  EXPECT_EQ("R1", d.rule_id);
  EXPECT_EQ(Severity::warning, d.severity);
  EXPECT_EQ(FaultClass::version_drift, d.fault_class);
  EXPECT_EQ(kCdl + "Reals.Subtract", d.suggestion);
}

TEST(Validator, UnknownAndOutOfScopeClasses) {
  auto b = and_block();
  b.instances[0].class_ref = QualifiedName::parse(kCdl + "Logical.AndBlock");
  auto r = validate(b, shipped_index());
  EXPECT_TRUE(r.has(FaultClass::unknown_class));
  EXPECT_FALSE(r.has(FaultClass::scope_violation));

  b.instances[0].class_ref = QualifiedName::parse("Modelica.Blocks.Logical.And");
  r = validate(b, shipped_index());
  EXPECT_TRUE(r.passed) << format_diagnostics(r);

  b.instances[0].class_ref = QualifiedName::parse("Modelica.Blocks.Math.Add");
  r = validate(b, shipped_index());
  EXPECT_TRUE(r.has(FaultClass::scope_violation));
  EXPECT_TRUE(r.has(FaultClass::unknown_class));
}

// Every (source, target) pair over the block's ports: R3 accepts exactly the
// pairs with one source, one sink and equal kinds.
TEST(Validator, ConnectTypingIsExhaustive) {
  struct P {
    std::string path;
    bool source;
    SignalKind kind;
  };
  const std::vector<P> ports = {
      {"a", true, SignalKind::Boolean},       {"b", true, SignalKind::Boolean},
      {"r", true, SignalKind::Real},          {"y", false, SignalKind::Boolean},
      {"and1.u1", false, SignalKind::Boolean}, {"and1.u2", false, SignalKind::Boolean},
      {"and1.y", true, SignalKind::Boolean},
  };
  auto base = and_block();
  base.connects.clear();
  for (const auto& s : ports)
    for (const auto& t : ports) {
      auto b = base;
      b.connects.push_back({PortPath::parse(s.path), PortPath::parse(t.path), std::nullopt, {}});
      auto r = validate(b, shipped_index());
      bool r3 = false;
      for (const auto& d : r.diagnostics) r3 = r3 || d.rule_id == "R3";
      bool ok = s.source != t.source && s.kind == t.kind;
      EXPECT_EQ(!ok, r3) << s.path << " -> " << t.path << "\n" << format_diagnostics(r);
      if (!ok) EXPECT_TRUE(r.has(FaultClass::type_mismatch));
    }
}

TEST(Validator, BrokenEndpointsAndDoubleDrive) {
  auto b = and_block();
  b.connects.push_back({PortPath::parse("and1.u3"), PortPath::parse("a"), std::nullopt, {}});
  b.connects.push_back({PortPath::parse("nope.y"), PortPath::parse("y"), std::nullopt, {}});
  b.connects.push_back({PortPath::parse("b"), PortPath::parse("and1.u1"), std::nullopt, {}});
  auto r = validate(b, shipped_index());
  int broken = 0, double_drive = 0;
  for (const auto& d : r.diagnostics) {
    if (d.rule_id != "R3") continue;
    EXPECT_EQ(FaultClass::broken_connection, d.fault_class);
    if (d.message.find("more than once") != std::string::npos)
      ++double_drive;
    else
      ++broken;
  }
  EXPECT_EQ(2, broken) << format_diagnostics(r);
  EXPECT_EQ(1, double_drive);
}

TEST(Validator, UnreachableOutputAndUnusedInstance) {
  auto b = and_block();
  b.connects.erase(b.connects.begin() + 1);  // and1.u2 left open
  b.instances.push_back(b.instances[0]);
  b.instances.back().name = "spare";
  b.connects.push_back({PortPath::parse("a"), PortPath::parse("spare.u1"), std::nullopt, {}});
  b.connects.push_back({PortPath::parse("b"), PortPath::parse("spare.u2"), std::nullopt, {}});
  auto r = validate(b, shipped_index());
  ASSERT_TRUE(r.has(FaultClass::broken_connection));
  auto it = std::find_if(r.diagnostics.begin(), r.diagnostics.end(),
                         [](const Diagnostic& d) { return d.rule_id == "R4" && d.location == "output y"; });
  ASSERT_NE(it, r.diagnostics.end()) << format_diagnostics(r);
  EXPECT_NE(std::string::npos, it->message.find("and1.u2"));
  EXPECT_TRUE(r.has(FaultClass::broken_connection, Severity::warning));  // spare is unused
}

TEST(Validator, DiagnosticsAreOrderedByRule) {
  auto b = and_block();
  b.instances[0].class_ref = QualifiedName::parse("Modelica.Blocks.Math.Add");
  b.connects.push_back({PortPath::parse("r"), PortPath::parse("y"), std::nullopt, {}});
  auto r = validate(b, shipped_index());
  std::vector<std::string> ids;
  for (const auto& d : r.diagnostics) ids.push_back(d.rule_id);
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end())) << format_diagnostics(r);
  EXPECT_EQ(r.diagnostics, validate(b, shipped_index()).diagnostics);
}

TEST(Validator, InterfaceMustMatchTask) {
  auto task = load_task("5");
  auto b = reference("Task5Ref");
  b.connectors.erase(std::remove_if(b.connectors.begin(), b.connectors.end(),
                                    [](const Connector& c) { return c.name == "u1SupFan"; }),
                     b.connectors.end());
  auto r = validate(b, shipped_index(), &task);
  EXPECT_TRUE(r.has(FaultClass::interface_mismatch)) << format_diagnostics(r);
  // Later rules cannot probe a block with errors.
  EXPECT_EQ(std::find(r.checked_rules.begin(), r.checked_rules.end(), "R7"), r.checked_rules.end());
}

TEST(Validator, FormatIsTabSeparated) {
  ValidationReport r;
  r.diagnostics.push_back({"R2", Severity::error, FaultClass::scope_violation, "instance a", 3, "x\ty", std::nullopt});
  r.diagnostics.push_back({"R7", Severity::warning, std::nullopt, "output y", 0, "skipped", std::nullopt});
  EXPECT_EQ("error\tR2\tscope_violation\tinstance a\tx y\nwarning\tR7\t-\toutput y\tskipped\n", format_diagnostics(r));
}

// ---------------------------------------------------------------------------
// seeded faults

TEST(SeedFault, EachClassIsDetected) {
  const std::vector<std::string> refs = {"Task1Ref", "Task2Ref", "Task3Ref", "Task4Ref", "Task5Ref"};
  for (auto fault : {FaultClass::unknown_class, FaultClass::broken_connection}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto& name = refs[seed % refs.size()];
      auto s = seed_fault(reference(name), fault, seed, &shipped_index());
      EXPECT_EQ(fault, s.record.fault);
      auto r = validate(s.block, shipped_index());
      EXPECT_TRUE(r.has(fault)) << name << " seed " << seed << " " << s.record.description << "\n"
                                << format_diagnostics(r);
    }
  }
}

TEST(SeedFault, DuplicateControllerIsDetected) {
  for (const auto* name : {"Task2Ref", "Task3Ref", "Task5Ref"})
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      auto s = seed_fault(reference(name), FaultClass::duplicate_path, seed);
      auto r = validate(s.block, shipped_index());
      EXPECT_TRUE(r.has(FaultClass::duplicate_path)) << name << "\n" << print(s.block) << format_diagnostics(r);
    }
}

TEST(SeedFault, InversionIsDetectedByTheProbe) {
  int flips = 0, swaps = 0;
  for (int t : {2, 3, 5}) {
    auto task = load_task(std::to_string(t));
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      auto s = seed_fault(reference("Task" + std::to_string(t) + "Ref"), FaultClass::inverted_direction, seed);
      (s.record.description.find("flipped") != std::string::npos ? flips : swaps)++;
      auto r = validate(s.block, shipped_index(), &task);
      EXPECT_TRUE(r.has(FaultClass::inverted_direction))
          << t << " " << s.record.description << "\n" << format_diagnostics(r);
      EXPECT_EQ(1u, r.error_count()) << format_diagnostics(r);
    }
  }
  EXPECT_GT(flips, 0);
  EXPECT_GT(swaps, 0);
}

TEST(SeedFault, DeterministicAndNotInjectable) {
  auto a = seed_fault(reference("Task4Ref"), FaultClass::broken_connection, 7);
  auto b = seed_fault(reference("Task4Ref"), FaultClass::broken_connection, 7);
  EXPECT_EQ(a.block, b.block);
  EXPECT_EQ(a.record.description, b.record.description);
  EXPECT_THROW(seed_fault(reference("Task1Ref"), FaultClass::inverted_direction, 0), NotInjectable);
  EXPECT_THROW(seed_fault(reference("Task1Ref"), FaultClass::duplicate_path, 0), NotInjectable);
  EXPECT_THROW(seed_fault(reference("Task2Ref"), FaultClass::scope_violation, 0), NotInjectable);
}

TEST(SeedFault, MutantsStillParseAfterPrinting) {
  for (auto fault : {FaultClass::unknown_class, FaultClass::broken_connection, FaultClass::duplicate_path,
                     FaultClass::inverted_direction}) {
    auto s = seed_fault(reference("Task2Ref"), fault, 3, &shipped_index());
    EXPECT_EQ(s.block, parse(print(s.block))) << to_string(fault);
  }
}
