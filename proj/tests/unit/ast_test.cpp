#include <gtest/gtest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "cdlgen/ast.hpp"
#include "cdlgen/error.hpp"
#include "test_support.hpp"

using namespace cdlgen;
using cdlgen::testing::fixture;

namespace {

const char* kMinimal = R"(block P
  Buildings.Controls.OBC.CDL.Interfaces.RealInput u;
  Buildings.Controls.OBC.CDL.Interfaces.RealOutput y;
equation
  connect(u, y);
end P;
)";

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string::npos) nl = s.size();
    out.push_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

}  // namespace

TEST(Parse, MinimalBlock) {
  auto b = parse(kMinimal);
  EXPECT_EQ(b.name, "P");
  EXPECT_EQ(b.kind, BlockKind::block);
  ASSERT_EQ(b.connectors.size(), 2u);
  EXPECT_EQ(b.connectors[0].direction, Direction::input);
  EXPECT_EQ(b.connectors[1].direction, Direction::output);
  EXPECT_TRUE(b.instances.empty());
  ASSERT_EQ(b.connects.size(), 1u);
  EXPECT_EQ(b.connects[0].source.str(), "u");
  EXPECT_EQ(b.connects[0].target.str(), "y");
}

TEST(Parse, Task4Counts) {
  auto b = parse(fixture("Task4.mo"));
  EXPECT_EQ(b.name, "Task4");
  EXPECT_EQ(b.instances.size(), 20u);
  EXPECT_EQ(b.connects.size(), 30u);
  ASSERT_TRUE(b.within.has_value());
  EXPECT_EQ(b.within->str(), "Buildings.Controls.OBC.CDL.Examples");

  auto* td = b.find_instance("truDel3K");
  ASSERT_NE(td, nullptr);
  ASSERT_NE(td->modifier("delayTime"), nullptr);
  EXPECT_EQ(td->modifier("delayTime")->value, "120");
  EXPECT_TRUE(td->modifier("delayTime")->is_final);
}

TEST(Parse, Task4Interface) {
  auto sig = interface_of(parse(fixture("Task4.mo")));
  std::vector<PortSignature> in = {{"TAirSup", SignalKind::Real, Direction::input, false},
                                   {"TAirSupSet", SignalKind::Real, Direction::input, false},
                                   {"uCooCoi", SignalKind::Real, Direction::input, false}};
  std::vector<PortSignature> out = {{"yChiWatResReq", SignalKind::Integer, Direction::output, false},
                                    {"yChiPlaReq", SignalKind::Integer, Direction::output, false}};
  EXPECT_EQ(sig.inputs, in);
  EXPECT_EQ(sig.outputs, out);
}

TEST(Parse, PlantRequestsConditionalsAndProtected) {
  auto b = parse(fixture("PlantRequests.mo"));
  EXPECT_EQ(b.name, "PlantRequests");

  auto* lat = b.find_instance("lat");
  ASSERT_NE(lat, nullptr);
  EXPECT_TRUE(lat->is_protected);
  ASSERT_TRUE(lat->condition.has_value());
  EXPECT_EQ(*lat->condition, "cooCoi == Buildings.Controls.OBC.ASHRAE.G36.Types.CoolingCoil.WaterBased");

  auto* thr = b.find_instance("thr");
  ASSERT_NE(thr, nullptr);
  EXPECT_TRUE(thr->is_protected);
  EXPECT_FALSE(thr->condition.has_value());

  auto* greThr = b.find_instance("greThr");
  ASSERT_NE(greThr, nullptr);
  EXPECT_EQ(greThr->modifier("h")->value, "Thys");

  auto sig = interface_of(b);
  for (const char* name : {"uCooCoiSet", "yChiWatResReq", "yChiPlaReq"}) {
    auto* p = sig.find(name);
    ASSERT_NE(p, nullptr) << name;
    EXPECT_TRUE(p->conditional) << name;
  }
  EXPECT_FALSE(sig.find("TAirSup")->conditional);
}

TEST(Interface, ZeroInputs) {
  auto b = parse(R"(block K
  Buildings.Controls.OBC.CDL.Interfaces.BooleanOutput y;
end K;)");
  auto sig = interface_of(b);
  EXPECT_TRUE(sig.inputs.empty());
  ASSERT_EQ(sig.outputs.size(), 1u);
  EXPECT_EQ(sig.outputs[0].kind, SignalKind::Boolean);
}

TEST(Print, RoundTripCorpus) {
  for (const std::string src : {std::string(kMinimal), fixture("Task4.mo"), fixture("PlantRequests.mo")}) {
    auto first = parse(src);
    auto printed = print(first);
    auto second = parse(printed);
    EXPECT_EQ(first, second);
    EXPECT_EQ(print(second), printed) << "printing is not a fixed point";
  }
}

TEST(Print, UnitAttributesVerbatim) {
  auto b = parse(R"(block T
  Buildings.Controls.OBC.CDL.Interfaces.RealInput TZon(final unit="K", displayUnit="degC") "Zone temperature";
  Buildings.Controls.OBC.CDL.Interfaces.RealOutput y;
end T;)");
  auto text = print(b);
  EXPECT_NE(text.find(R"(final unit="K")"), std::string::npos);
  EXPECT_NE(text.find(R"(displayUnit="degC")"), std::string::npos);
  EXPECT_EQ(b.connectors[0].unit(), "K");
  EXPECT_EQ(b.connectors[0].display_unit(), "degC");
}

TEST(Print, AnnotationsByteIdentical) {
  auto src = fixture("PlantRequests.mo");
  auto b = parse(src);
  auto again = parse(print(b));
  std::size_t checked = 0;
  for (std::size_t i = 0; i < b.connects.size(); ++i) {
    if (!b.connects[i].annotation) continue;
    EXPECT_NE(src.find(*b.connects[i].annotation), std::string::npos);
    EXPECT_EQ(b.connects[i].annotation, again.connects[i].annotation);
    ++checked;
  }
  EXPECT_GT(checked, 10u);

  auto task4_src = fixture("Task4.mo");
  auto task4 = parse(task4_src);
  ASSERT_TRUE(task4.annotation.has_value());
  EXPECT_NE(task4_src.find(*task4.annotation), std::string::npos);
  EXPECT_EQ(task4.annotation, parse(print(task4)).annotation);
}

// Error locality: a stray character injected at the start of any line is
// reported on that line.
TEST(Errors, InjectedTokenReportsItsLine) {
  auto lines = lines_of(fixture("Task4.mo"));
  int checked = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto mutated = lines;
    mutated[i] = "# " + mutated[i];
    try {
      parse(join_lines(mutated));
      ADD_FAILURE() << "no error for injection at line " << i + 1;
    } catch (const SyntaxError& e) {
      EXPECT_EQ(e.line(), static_cast<int>(i + 1));
      ++checked;
    }
  }
  EXPECT_EQ(checked, static_cast<int>(lines.size()));
}

TEST(Errors, ParserLevelLocality) {
  auto lines = lines_of(fixture("Task4.mo"));
  int checked = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto pos = lines[i].find("connect(");
    if (pos == std::string::npos) continue;
    auto mutated = lines;
    mutated[i].replace(pos, 8, "connect[");
    try {
      parse(join_lines(mutated));
      ADD_FAILURE() << "no error at line " << i + 1;
    } catch (const SyntaxError& e) {
      EXPECT_EQ(e.line(), static_cast<int>(i + 1));
      EXPECT_FALSE(e.expected().empty());
      ++checked;
    }
  }
  EXPECT_EQ(checked, 30);
}

TEST(Errors, UnsupportedConstructsAreNamed) {
  auto with_section = std::string(kMinimal);
  with_section.replace(with_section.find("equation"), 8, "algorithm");
  try {
    parse(with_section);
    FAIL();
  } catch (const UnsupportedConstruct& e) {
    EXPECT_EQ(e.construct(), "algorithm");
  }
  EXPECT_THROW(parse(R"(block E
  extends Buildings.Controls.OBC.CDL.Logical.And;
  Buildings.Controls.OBC.CDL.Interfaces.RealOutput y;
end E;)"),
               UnsupportedConstruct);
  EXPECT_THROW(parse(R"(block E
  Buildings.Controls.OBC.CDL.Interfaces.RealOutput y;
equation
  y = 1;
end E;)"),
               UnsupportedConstruct);
}

TEST(Errors, MissingEndName) {
  EXPECT_THROW(parse("block A\n  Buildings.Controls.OBC.CDL.Interfaces.RealInput u;\nend B;"), SyntaxError);
}

TEST(Invariants, Violations) {
  // unit on a Boolean connector
  EXPECT_THROW(parse(R"(block A
  Buildings.Controls.OBC.CDL.Interfaces.BooleanInput u(final unit="1");
end A;)"),
               InvalidBlock);
  // min > max
  EXPECT_THROW(parse(R"(block A
  Buildings.Controls.OBC.CDL.Interfaces.RealInput u(min=2, max=1);
end A;)"),
               InvalidBlock);
  // name collision between connector and instance
  EXPECT_THROW(parse(R"(block A
  Buildings.Controls.OBC.CDL.Interfaces.RealInput u;
  Buildings.Controls.OBC.CDL.Logical.Not u;
end A;)"),
               InvalidBlock);
  // duplicate modifier
  EXPECT_THROW(parse(R"(block A
  Buildings.Controls.OBC.CDL.Interfaces.RealInput u;
  Buildings.Controls.OBC.CDL.Reals.GreaterThreshold g(t=1, t=2);
end A;)"),
               InvalidBlock);
  // no connectors
  EXPECT_THROW(parse("block A\n  parameter Real k=1;\nend A;"), InvalidBlock);
}

TEST(Names, QualifiedName) {
  auto q = QualifiedName::parse("Buildings.Controls.OBC.CDL.Logical.And");
  EXPECT_EQ(q.terminal(), "And");
  EXPECT_EQ(q.segments().size(), 6u);
  EXPECT_TRUE(q.has_prefix(QualifiedName::parse("Buildings.Controls")));
  EXPECT_FALSE(q.has_prefix(QualifiedName::parse("Buildings.Control")));
  EXPECT_THROW(QualifiedName::parse("Buildings..And"), InvalidBlock);
  EXPECT_THROW(QualifiedName::parse("1abc"), InvalidBlock);
  EXPECT_TRUE(is_identifier("_x1"));
  EXPECT_FALSE(is_identifier("x-1"));
}

TEST(Parse, DocStringsMayHoldUtf8) {
  auto b = parse("block A \"Zone \xC2\xB0" "C\"\n  Buildings.Controls.OBC.CDL.Interfaces.RealInput u;\nend A;");
  EXPECT_EQ(*b.doc, "Zone \xC2\xB0" "C");
  EXPECT_THROW(parse("block A\xC3\xA9\n  Buildings.Controls.OBC.CDL.Interfaces.RealInput u;\nend A;"), SyntaxError);
}
