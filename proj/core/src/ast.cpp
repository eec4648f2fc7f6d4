#include "cdlgen/ast.hpp"

#include <cctype>
#include <charconv>
#include <set>

#include "cdlgen/error.hpp"
#include "lexer.hpp"

namespace cdlgen {

using detail::Token;
using detail::TokenKind;

// ---------------------------------------------------------------------------
// names

bool is_identifier(std::string_view text) {
  if (text.empty()) return false;
  auto c0 = static_cast<unsigned char>(text[0]);
  if (!(std::isalpha(c0) || c0 == '_') || c0 >= 0x80) return false;
  for (char ch : text.substr(1)) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || !(std::isalnum(c) || c == '_')) return false;
  }
  return true;
}

QualifiedName::QualifiedName(std::vector<std::string> segments) : segments_(std::move(segments)) {
  if (segments_.empty()) throw InvalidBlock("qualified name must not be empty");
  for (const auto& s : segments_)
    if (!is_identifier(s)) throw InvalidBlock("invalid identifier '" + s + "' in class path");
}

QualifiedName QualifiedName::parse(std::string_view dotted) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto dot = dotted.find('.', start);
    parts.emplace_back(dotted.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return QualifiedName(std::move(parts));
}

std::string QualifiedName::str() const {
  std::string out;
  for (const auto& s : segments_) {
    if (!out.empty()) out += '.';
    out += s;
  }
  return out;
}

bool QualifiedName::has_prefix(const QualifiedName& prefix) const {
  if (prefix.segments_.size() > segments_.size()) return false;
  for (std::size_t i = 0; i < prefix.segments_.size(); ++i)
    if (segments_[i] != prefix.segments_[i]) return false;
  return true;
}

PortPath PortPath::parse(std::string_view dotted) {
  PortPath p;
  std::size_t start = 0;
  while (true) {
    auto dot = dotted.find('.', start);
    p.segments.emplace_back(dotted.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return p;
}

std::string PortPath::str() const {
  std::string out;
  for (const auto& s : segments) {
    if (!out.empty()) out += '.';
    out += s;
  }
  return out;
}

std::string_view to_string(Direction d) { return d == Direction::input ? "input" : "output"; }

std::string_view to_string(SignalKind k) {
  switch (k) {
    case SignalKind::Real: return "Real";
    case SignalKind::Boolean: return "Boolean";
    case SignalKind::Integer: return "Integer";
  }
  return "?";
}

std::string_view to_string(BlockKind k) { return k == BlockKind::block ? "block" : "model"; }

std::optional<std::pair<Direction, SignalKind>> connector_class(const QualifiedName& name) {
  const auto& seg = name.segments();
  if (seg.size() < 2 || seg[seg.size() - 2] != "Interfaces") return std::nullopt;
  static const std::pair<std::string_view, std::pair<Direction, SignalKind>> table[] = {
      {"RealInput", {Direction::input, SignalKind::Real}},
      {"RealOutput", {Direction::output, SignalKind::Real}},
      {"BooleanInput", {Direction::input, SignalKind::Boolean}},
      {"BooleanOutput", {Direction::output, SignalKind::Boolean}},
      {"IntegerInput", {Direction::input, SignalKind::Integer}},
      {"IntegerOutput", {Direction::output, SignalKind::Integer}},
  };
  for (const auto& [n, v] : table)
    if (seg.back() == n) return v;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// lookups

namespace {

std::optional<std::string> unquote(const Modifier* m) {
  if (!m) return std::nullopt;
  const auto& v = m->value;
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

std::optional<double> numeric(const Modifier* m) {
  if (!m) return std::nullopt;
  std::string_view v = m->value;
  bool neg = false;
  if (!v.empty() && (v.front() == '-' || v.front() == '+')) {
    neg = v.front() == '-';
    v.remove_prefix(1);
    while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
  }
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) return std::nullopt;
  return neg ? -out : out;
}

}  // namespace

const Modifier* Connector::attribute(std::string_view key) const {
  for (const auto& a : attributes)
    if (a.name == key) return &a;
  return nullptr;
}

std::optional<std::string> Connector::unit() const { return unquote(attribute("unit")); }
std::optional<std::string> Connector::display_unit() const {
  return unquote(attribute("displayUnit"));
}
std::optional<std::string> Connector::quantity() const { return unquote(attribute("quantity")); }
std::optional<double> Connector::min() const { return numeric(attribute("min")); }
std::optional<double> Connector::max() const { return numeric(attribute("max")); }

const Modifier* ComponentInstance::modifier(std::string_view key) const {
  for (const auto& m : modifiers)
    if (m.name == key) return &m;
  return nullptr;
}

QualifiedName ModelicaBlock::fqn() const {
  std::vector<std::string> seg;
  if (within) seg = within->segments();
  seg.push_back(name);
  return QualifiedName(std::move(seg));
}

const Connector* ModelicaBlock::find_connector(std::string_view n) const {
  for (const auto& c : connectors)
    if (c.name == n) return &c;
  return nullptr;
}

const Parameter* ModelicaBlock::find_parameter(std::string_view n) const {
  for (const auto& p : parameters)
    if (p.name == n) return &p;
  return nullptr;
}

const ComponentInstance* ModelicaBlock::find_instance(std::string_view n) const {
  for (const auto& i : instances)
    if (i.name == n) return &i;
  return nullptr;
}

const PortSignature* InterfaceSignature::find(std::string_view name) const {
  for (const auto& p : inputs)
    if (p.name == name) return &p;
  for (const auto& p : outputs)
    if (p.name == name) return &p;
  return nullptr;
}

InterfaceSignature interface_of(const ModelicaBlock& block) {
  InterfaceSignature sig;
  for (const auto& c : block.connectors) {
    PortSignature p{c.name, c.kind, c.direction, c.conditional()};
    (c.direction == Direction::input ? sig.inputs : sig.outputs).push_back(std::move(p));
  }
  return sig;
}

void check_invariants(const ModelicaBlock& block) {
  if (block.connectors.empty())
    throw InvalidBlock("block " + block.name + " declares no connectors");
  std::set<std::string> names;
  auto claim = [&](const std::string& n, std::string_view what) {
    if (!names.insert(n).second)
      throw InvalidBlock("duplicate name '" + n + "' (" + std::string(what) + ")");
  };
  for (const auto& c : block.connectors) claim(c.name, "connector");
  for (const auto& p : block.parameters) claim(p.name, "parameter");
  for (const auto& i : block.instances) claim(i.name, "instance");

  auto unique_mods = [](const std::vector<Modifier>& mods, const std::string& owner) {
    std::set<std::string> seen;
    for (const auto& m : mods)
      if (!seen.insert(m.name).second)
        throw InvalidBlock("duplicate modifier '" + m.name + "' on " + owner);
  };
  static const std::set<std::string, std::less<>> real_only = {"unit", "displayUnit", "quantity",
                                                               "min", "max"};
  for (const auto& c : block.connectors) {
    unique_mods(c.attributes, c.name);
    if (c.kind != SignalKind::Real) {
      for (const auto& a : c.attributes)
        if (real_only.contains(a.name))
          throw InvalidBlock("attribute '" + a.name + "' is only legal on Real connectors (" +
                             c.name + ")");
    }
    auto lo = c.min();
    auto hi = c.max();
    if (lo && hi && *lo > *hi) throw InvalidBlock("min > max on connector " + c.name);
  }
  for (const auto& i : block.instances) unique_mods(i.modifiers, i.name);
  for (const auto& p : block.parameters) unique_mods(p.modifiers, p.name);
  for (const auto& eq : block.connects) {
    for (const auto* path : {&eq.source, &eq.target})
      if (path->segments.empty() || path->segments.size() > 2)
        throw InvalidBlock("connect endpoint '" + path->str() + "' must have 1 or 2 segments");
  }
}

// ---------------------------------------------------------------------------
// parser

namespace {

const std::set<std::string, std::less<>>& unsupported_keywords() {
  static const std::set<std::string, std::less<>> kw = {
      "algorithm", "initial",  "extends",    "import",   "function", "connector", "record",
      "package",   "type",     "class",      "model",    "block",    "replaceable", "redeclare",
      "inner",     "outer",    "constant",   "discrete", "input",    "output",    "flow",
      "stream",    "partial",  "encapsulated", "when",   "der",      "expandable", "operator",
      "pure",      "impure",   "external",   "for",      "while",    "if",        "assert",
      "terminate", "reinit"};
  return kw;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src), toks_(detail::tokenize(src)) {}

  ModelicaBlock parse_file() {
    ModelicaBlock block;
    if (peek().is_word("within")) {
      next();
      if (!peek().is_symbol(";")) block.within = parse_qualified_name();
      expect_symbol(";");
    }
    const Token& head = peek();
    if (head.is_word("block")) {
      block.kind = BlockKind::block;
    } else if (head.is_word("model")) {
      block.kind = BlockKind::model;
    } else if (head.kind == TokenKind::identifier && unsupported_keywords().contains(head.text)) {
      throw UnsupportedConstruct(head.line, head.column, std::string(head.text));
    } else {
      fail(head, "expected class definition", {"'block'", "'model'"});
    }
    next();
    block.name = expect_identifier("block name");
    if (peek().kind == TokenKind::string) block.doc = string_body(next());

    parse_composition(block);

    expect_word("end");
    const Token& end_name = peek();
    std::string closing = expect_identifier("block name after 'end'");
    if (closing != block.name)
      fail(end_name, "'end " + closing + "' does not close block " + block.name,
           {"'" + block.name + "'"});
    expect_symbol(";");
    if (peek().kind != TokenKind::end) fail(peek(), "unexpected text after end of block", {"end of file"});
    check_invariants(block);
    return block;
  }

 private:
  // -- token helpers -------------------------------------------------------

  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }

  [[noreturn]] void fail(const Token& at, const std::string& message,
                         std::vector<std::string> expected) const {
    std::string found = at.kind == TokenKind::end ? "end of file" : "'" + std::string(at.text) + "'";
    throw SyntaxError(at.line, at.column, message + ", found " + found, std::move(expected));
  }

  void expect_symbol(std::string_view sym) {
    if (!peek().is_symbol(sym)) fail(peek(), "unexpected token", {"'" + std::string(sym) + "'"});
    next();
  }

  void expect_word(std::string_view word) {
    if (!peek().is_word(word)) fail(peek(), "unexpected token", {"'" + std::string(word) + "'"});
    next();
  }

  std::string expect_identifier(std::string_view what) {
    const Token& t = peek();
    if (t.kind != TokenKind::identifier) fail(t, "unexpected token", {std::string(what)});
    next();
    return std::string(t.text);
  }

  static std::string string_body(const Token& t) {
    return std::string(t.text.substr(1, t.text.size() - 2));
  }

  QualifiedName parse_qualified_name() {
    std::vector<std::string> seg;
    seg.push_back(expect_identifier("class name"));
    while (peek().is_symbol(".")) {
      next();
      seg.push_back(expect_identifier("identifier after '.'"));
    }
    return QualifiedName(std::move(seg));
  }

  // -- opaque text capture ---------------------------------------------------

  // Collects an expression up to a depth-0 stop token. Token texts are joined
  // with single spaces where the source had whitespace.
  template <typename Stop>
  std::string capture_expression(Stop stop, std::string_view what) {
    std::string out;
    int depth = 0;
    const Token* first = &peek();
    const Token* last = nullptr;
    while (true) {
      const Token& t = peek();
      if (t.kind == TokenKind::end) fail(t, "unterminated " + std::string(what), {"';'"});
      if (depth == 0 && stop(t, last)) break;
      if (t.is_symbol("(") || t.is_symbol("[") || t.is_symbol("{")) ++depth;
      if (t.is_symbol(")") || t.is_symbol("]") || t.is_symbol("}")) {
        if (depth == 0) fail(t, "unbalanced '" + std::string(t.text) + "' in " + std::string(what), {});
        --depth;
      }
      if (last && t.space_before) out += ' ';
      out += t.text;
      last = &next();
    }
    if (out.empty()) fail(*first, "empty " + std::string(what), {"expression"});
    return out;
  }

  // A depth-0 string ends an expression unless it follows an operator.
  static bool string_ends_expression(const Token& t, const Token* last) {
    if (t.kind != TokenKind::string || last == nullptr) return false;
    return !(last->kind == TokenKind::symbol && !last->is_symbol(")") && !last->is_symbol("]") &&
             !last->is_symbol("}"));
  }

  std::string capture_annotation() {
    const Token& kw = next();  // 'annotation'
    if (!peek().is_symbol("(")) fail(peek(), "unexpected token", {"'('"});
    int depth = 0;
    std::size_t end = kw.end;
    do {
      const Token& t = peek();
      if (t.kind == TokenKind::end) fail(t, "unterminated annotation", {"')'"});
      if (t.is_symbol("(") || t.is_symbol("[") || t.is_symbol("{")) ++depth;
      if (t.is_symbol(")") || t.is_symbol("]") || t.is_symbol("}")) --depth;
      end = t.end;
      next();
    } while (depth > 0);
    return std::string(src_.substr(kw.offset, end - kw.offset));
  }

  std::vector<Modifier> parse_modification() {
    std::vector<Modifier> mods;
    expect_symbol("(");
    if (peek().is_symbol(")")) {
      next();
      return mods;
    }
    while (true) {
      Modifier m;
      if (peek().is_word("redeclare"))
        throw UnsupportedConstruct(peek().line, peek().column, "redeclare");
      if (peek().is_word("each")) {
        m.each = true;
        next();
      }
      if (peek().is_word("final")) {
        m.is_final = true;
        next();
      }
      m.name = expect_identifier("modifier name");
      if (peek().is_symbol("(") || peek().is_symbol("."))
        throw UnsupportedConstruct(peek().line, peek().column, "nested modification of " + m.name);
      if (!peek().is_symbol("=")) fail(peek(), "unexpected token in modification", {"'='"});
      next();
      m.value = capture_expression(
          [](const Token& t, const Token*) { return t.is_symbol(",") || t.is_symbol(")"); },
          "modifier value");
      mods.push_back(std::move(m));
      if (peek().is_symbol(",")) {
        next();
        continue;
      }
      expect_symbol(")");
      break;
    }
    return mods;
  }

  // Trailing part shared by all declarations: [if cond] ["doc"] [annotation] ;
  struct Tail {
    std::optional<std::string> condition;
    std::optional<std::string> doc;
    std::optional<std::string> annotation;
  };

  Tail parse_tail() {
    Tail tail;
    if (peek().is_word("if")) {
      next();
      tail.condition = capture_expression(
          [](const Token& t, const Token* last) {
            return t.is_symbol(";") || t.is_word("annotation") || string_ends_expression(t, last);
          },
          "condition");
    }
    if (peek().kind == TokenKind::string) tail.doc = string_body(next());
    if (peek().is_word("annotation")) tail.annotation = capture_annotation();
    if (!peek().is_symbol(";")) {
      std::vector<std::string> expected = {"';'"};
      if (!tail.annotation) expected.insert(expected.begin(), "'annotation'");
      if (!tail.doc && !tail.annotation) expected.insert(expected.begin(), "description string");
      fail(peek(), "unexpected token in declaration", expected);
    }
    next();
    return tail;
  }

  // -- sections ------------------------------------------------------------

  void parse_composition(ModelicaBlock& block) {
    bool is_protected = false;
    while (true) {
      const Token& t = peek();
      if (t.kind == TokenKind::end) fail(t, "missing 'end " + block.name + ";'", {"'end'"});
      if (t.kind != TokenKind::identifier)
        fail(t, "unexpected token", {"declaration", "'equation'", "'end'"});
      if (t.text == "end") return;
      if (t.text == "public" || t.text == "protected") {
        is_protected = t.text == "protected";
        next();
        continue;
      }
      if (t.text == "equation") {
        next();
        parse_equations(block);
        continue;
      }
      if (t.text == "annotation") {
        set_block_annotation(block);
        continue;
      }
      if (t.text == "initial" && peek(1).is_word("equation"))
        throw UnsupportedConstruct(t.line, t.column, "initial equation");
      if (t.text == "final" && peek(1).is_word("parameter")) {
        next();
        parse_parameter(block, is_protected, true);
        continue;
      }
      if (t.text == "parameter") {
        parse_parameter(block, is_protected, false);
        continue;
      }
      if (unsupported_keywords().contains(t.text))
        throw UnsupportedConstruct(t.line, t.column, std::string(t.text));
      parse_component(block, is_protected);
    }
  }

  void set_block_annotation(ModelicaBlock& block) {
    const Token& t = peek();
    if (block.annotation) fail(t, "duplicate class annotation", {});
    block.annotation = capture_annotation();
    expect_symbol(";");
  }

  void parse_parameter(ModelicaBlock& block, bool is_protected, bool is_final) {
    const Token& kw = next();  // 'parameter'
    Parameter p;
    p.line.value = kw.line;
    p.is_final = is_final;
    p.is_protected = is_protected;
    p.type_name = parse_qualified_name().str();
    p.name = expect_identifier("parameter name");
    if (peek().is_symbol("["))
      throw UnsupportedConstruct(peek().line, peek().column, "array declaration");
    if (peek().is_symbol("(")) p.modifiers = parse_modification();
    if (peek().is_symbol("=")) {
      next();
      p.default_value = capture_expression(
          [](const Token& t, const Token* last) {
            return t.is_symbol(";") || t.is_word("annotation") || t.is_word("if") ||
                   string_ends_expression(t, last);
          },
          "parameter value");
    }
    Tail tail = parse_tail();
    if (tail.condition)
      throw UnsupportedConstruct(kw.line, kw.column, "conditional parameter");
    p.doc = std::move(tail.doc);
    p.annotation = std::move(tail.annotation);
    block.parameters.push_back(std::move(p));
  }

  void parse_component(ModelicaBlock& block, bool is_protected) {
    const Token& start = peek();
    QualifiedName type = parse_qualified_name();
    std::string name = expect_identifier("component name");
    if (peek().is_symbol("["))
      throw UnsupportedConstruct(peek().line, peek().column, "array declaration");
    std::vector<Modifier> mods;
    if (peek().is_symbol("(")) mods = parse_modification();
    Tail tail = parse_tail();

    if (auto cc = connector_class(type)) {
      Connector c;
      c.class_ref = std::move(type);
      c.name = std::move(name);
      c.direction = cc->first;
      c.kind = cc->second;
      c.attributes = std::move(mods);
      c.condition = std::move(tail.condition);
      c.doc = std::move(tail.doc);
      c.annotation = std::move(tail.annotation);
      c.line.value = start.line;
      if (is_protected)
        throw UnsupportedConstruct(start.line, start.column, "protected connector " + c.name);
      block.connectors.push_back(std::move(c));
      return;
    }
    ComponentInstance inst;
    inst.class_ref = std::move(type);
    inst.name = std::move(name);
    inst.modifiers = std::move(mods);
    inst.is_protected = is_protected;
    inst.condition = std::move(tail.condition);
    inst.doc = std::move(tail.doc);
    inst.annotation = std::move(tail.annotation);
    inst.line.value = start.line;
    block.instances.push_back(std::move(inst));
  }

  PortPath parse_port_path() {
    PortPath p;
    p.segments.push_back(expect_identifier("port reference"));
    while (peek().is_symbol(".")) {
      next();
      p.segments.push_back(expect_identifier("port name"));
    }
    if (peek().is_symbol("["))
      throw UnsupportedConstruct(peek().line, peek().column, "array subscript in connect");
    return p;
  }

  void parse_equations(ModelicaBlock& block) {
    while (true) {
      const Token& t = peek();
      if (t.kind == TokenKind::end) fail(t, "missing 'end " + block.name + ";'", {"'end'"});
      if (t.is_word("end") || t.is_word("public") || t.is_word("protected") ||
          t.is_word("equation"))
        return;
      if (t.is_word("annotation")) {
        set_block_annotation(block);
        continue;
      }
      if (t.is_word("connect")) {
        next();
        ConnectEquation eq;
        eq.line.value = t.line;
        expect_symbol("(");
        eq.source = parse_port_path();
        expect_symbol(",");
        eq.target = parse_port_path();
        expect_symbol(")");
        if (peek().is_word("annotation")) eq.annotation = capture_annotation();
        expect_symbol(";");
        block.connects.push_back(std::move(eq));
        continue;
      }
      if (t.kind == TokenKind::identifier && unsupported_keywords().contains(t.text))
        throw UnsupportedConstruct(t.line, t.column, std::string(t.text));
      if (t.kind == TokenKind::identifier)
        throw UnsupportedConstruct(t.line, t.column, "non-connect equation");
      fail(t, "unexpected token in equation section", {"'connect'", "'annotation'", "'end'"});
    }
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

ModelicaBlock parse(std::string_view source) { return Parser(source).parse_file(); }

}  // namespace cdlgen
