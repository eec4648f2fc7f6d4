#include <sstream>

#include "cdlgen/ast.hpp"

namespace cdlgen {

namespace {

void print_modifiers(std::ostream& os, const std::vector<Modifier>& mods) {
  if (mods.empty()) return;
  os << '(';
  for (std::size_t i = 0; i < mods.size(); ++i) {
    if (i != 0) os << ", ";
    const auto& m = mods[i];
    if (m.each) os << "each ";
    if (m.is_final) os << "final ";
    os << m.name << '=' << m.value;
  }
  os << ')';
}

void print_tail(std::ostream& os, const std::optional<std::string>& condition,
                const std::optional<std::string>& doc, const std::optional<std::string>& annotation) {
  if (condition) os << " if " << *condition;
  if (doc) os << " \"" << *doc << '"';
  if (annotation) os << ' ' << *annotation;
  os << ";\n";
}

void print_parameter(std::ostream& os, const Parameter& p) {
  os << "  ";
  if (p.is_final) os << "final ";
  os << "parameter " << p.type_name << ' ' << p.name;
  print_modifiers(os, p.modifiers);
  if (p.default_value) os << '=' << *p.default_value;
  print_tail(os, std::nullopt, p.doc, p.annotation);
}

void print_instance(std::ostream& os, const ComponentInstance& i) {
  os << "  " << i.class_ref.str() << ' ' << i.name;
  print_modifiers(os, i.modifiers);
  print_tail(os, i.condition, i.doc, i.annotation);
}

}  // namespace

std::string print(const ModelicaBlock& block) {
  std::ostringstream os;
  if (block.within) os << "within " << block.within->str() << ";\n";
  os << to_string(block.kind) << ' ' << block.name;
  if (block.doc) os << " \"" << *block.doc << '"';
  os << '\n';

  for (const auto& c : block.connectors) {
    os << "  " << c.class_ref.str() << ' ' << c.name;
    print_modifiers(os, c.attributes);
    print_tail(os, c.condition, c.doc, c.annotation);
  }
  for (const auto& p : block.parameters)
    if (!p.is_protected) print_parameter(os, p);
  for (const auto& i : block.instances)
    if (!i.is_protected) print_instance(os, i);

  bool any_protected = false;
  for (const auto& p : block.parameters) any_protected |= p.is_protected;
  for (const auto& i : block.instances) any_protected |= i.is_protected;
  if (any_protected) {
    os << "protected\n";
    for (const auto& p : block.parameters)
      if (p.is_protected) print_parameter(os, p);
    for (const auto& i : block.instances)
      if (i.is_protected) print_instance(os, i);
  }

  if (!block.connects.empty()) {
    os << "equation\n";
    for (const auto& eq : block.connects) {
      os << "  connect(" << eq.source.str() << ", " << eq.target.str() << ')';
      if (eq.annotation) os << ' ' << *eq.annotation;
      os << ";\n";
    }
  }
  if (block.annotation) os << "  " << *block.annotation << ";\n";
  os << "end " << block.name << ";\n";
  return os.str();
}

}  // namespace cdlgen
