#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdlgen {

// Dotted Modelica class path, e.g. Buildings.Controls.OBC.CDL.Logical.And.
class QualifiedName {
 public:
  QualifiedName() = default;
  explicit QualifiedName(std::vector<std::string> segments);

  // Throws InvalidBlock when a segment is not a Modelica identifier.
  static QualifiedName parse(std::string_view dotted);

  const std::vector<std::string>& segments() const noexcept { return segments_; }
  const std::string& terminal() const { return segments_.back(); }
  bool empty() const noexcept { return segments_.empty(); }
  std::string str() const;

  bool has_prefix(const QualifiedName& prefix) const;

  friend bool operator==(const QualifiedName&, const QualifiedName&) = default;
  friend auto operator<=>(const QualifiedName&, const QualifiedName&) = default;

 private:
  std::vector<std::string> segments_;
};

bool is_identifier(std::string_view text);

enum class Direction { input, output };
enum class SignalKind { Real, Boolean, Integer };
enum class BlockKind { block, model };

std::string_view to_string(Direction d);
std::string_view to_string(SignalKind k);
std::string_view to_string(BlockKind k);

// Source line of a declaration. Carried for diagnostics only and ignored by
// structural equality, so parse(print(b)) == b holds.
struct SourceLine {
  int value = 0;
  friend bool operator==(SourceLine, SourceLine) { return true; }
};

// One `name=value` entry of a modification list. The value is opaque
// expression text.
struct Modifier {
  std::string name;
  std::string value;
  bool is_final = false;
  bool each = false;

  friend bool operator==(const Modifier&, const Modifier&) = default;
};

struct Connector {
  QualifiedName class_ref;  // e.g. ...CDL.Interfaces.RealInput
  std::string name;
  Direction direction = Direction::input;
  SignalKind kind = SignalKind::Real;
  std::vector<Modifier> attributes;
  std::optional<std::string> condition;
  std::optional<std::string> doc;
  std::optional<std::string> annotation;
  SourceLine line;

  const Modifier* attribute(std::string_view key) const;
  std::optional<std::string> unit() const;
  std::optional<std::string> display_unit() const;
  std::optional<std::string> quantity() const;
  std::optional<double> min() const;
  std::optional<double> max() const;
  bool conditional() const { return condition.has_value(); }

  friend bool operator==(const Connector&, const Connector&) = default;
};

struct Parameter {
  std::string type_name;  // Real, Integer, Boolean, String or a class path
  std::string name;
  std::vector<Modifier> modifiers;
  std::optional<std::string> default_value;
  bool is_final = false;
  bool is_protected = false;
  std::optional<std::string> doc;
  std::optional<std::string> annotation;
  SourceLine line;

  friend bool operator==(const Parameter&, const Parameter&) = default;
};

struct ComponentInstance {
  QualifiedName class_ref;
  std::string name;
  std::vector<Modifier> modifiers;
  bool is_protected = false;
  std::optional<std::string> condition;
  std::optional<std::string> doc;
  std::optional<std::string> annotation;
  SourceLine line;

  const Modifier* modifier(std::string_view key) const;

  friend bool operator==(const ComponentInstance&, const ComponentInstance&) = default;
};

// `instance.port` or a bare block connector name.
struct PortPath {
  std::vector<std::string> segments;

  static PortPath parse(std::string_view dotted);
  bool is_connector() const { return segments.size() == 1; }
  const std::string& head() const { return segments.front(); }
  std::string str() const;

  friend bool operator==(const PortPath&, const PortPath&) = default;
  friend auto operator<=>(const PortPath&, const PortPath&) = default;
};

struct ConnectEquation {
  PortPath source;
  PortPath target;
  std::optional<std::string> annotation;
  SourceLine line;

  friend bool operator==(const ConnectEquation&, const ConnectEquation&) = default;
};

struct ModelicaBlock {
  std::string name;
  BlockKind kind = BlockKind::block;
  std::optional<QualifiedName> within;
  std::optional<std::string> doc;
  std::vector<Connector> connectors;
  std::vector<Parameter> parameters;
  std::vector<ComponentInstance> instances;
  std::vector<ConnectEquation> connects;
  std::optional<std::string> annotation;

  QualifiedName fqn() const;
  const Connector* find_connector(std::string_view name) const;
  const Parameter* find_parameter(std::string_view name) const;
  const ComponentInstance* find_instance(std::string_view name) const;

  friend bool operator==(const ModelicaBlock&, const ModelicaBlock&) = default;
};

struct PortSignature {
  std::string name;
  SignalKind kind = SignalKind::Real;
  Direction direction = Direction::input;
  bool conditional = false;

  friend bool operator==(const PortSignature&, const PortSignature&) = default;
};

struct InterfaceSignature {
  std::vector<PortSignature> inputs;
  std::vector<PortSignature> outputs;

  const PortSignature* find(std::string_view name) const;
  friend bool operator==(const InterfaceSignature&, const InterfaceSignature&) = default;
};

// Parses one `block` or `model` of the supported CDL subset.
// Throws SyntaxError, UnsupportedConstruct or InvalidBlock.
ModelicaBlock parse(std::string_view source);

// Canonical source: connectors, parameters, instances, then the equation
// section; two-space indentation, one declaration per line.
std::string print(const ModelicaBlock& block);

InterfaceSignature interface_of(const ModelicaBlock& block);

// Checks the structural invariants; throws InvalidBlock on the first breach.
void check_invariants(const ModelicaBlock& block);

// Recognises CDL/MSL connector classes (Interfaces.RealInput, ...).
std::optional<std::pair<Direction, SignalKind>> connector_class(const QualifiedName& name);

}  // namespace cdlgen
