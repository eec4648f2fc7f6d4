#include "cdlgen/prompt.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "cdlgen/error.hpp"
#include "embedded.hpp"
#include "util.hpp"

namespace cdlgen {

std::vector<std::string> placeholders_in(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string_view::npos) {
    auto close = text.find('}', pos + 1);
    if (close == std::string_view::npos) break;
    auto name = text.substr(pos + 1, close - pos - 1);
    if (is_identifier(name)) {
      if (std::find(out.begin(), out.end(), name) == out.end()) out.emplace_back(name);
      pos = close + 1;
    } else {
      ++pos;
    }
  }
  return out;
}

PromptTemplate parse_template(std::string_view name, std::string_view text) {
  auto bad = [&](const std::string& why) { return InvalidTemplate(std::string(name) + ": " + why); };
  constexpr std::string_view head = "#prompt-template ";
  auto nl = text.find('\n');
  if (nl == std::string_view::npos || text.substr(0, head.size()) != head)
    throw bad("missing #prompt-template header");

  PromptTemplate t;
  t.name = std::string(name);
  bool saw_placeholders = false;
  for (const auto& kv : util::split(text.substr(head.size(), nl - head.size()), ' ')) {
    if (kv.empty()) continue;
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw bad("header entry '" + kv + "' is not key=value");
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "role") {
      t.role_id = value;
    } else if (key == "placeholders") {
      saw_placeholders = true;
      if (!value.empty()) t.placeholders = util::split(value, ',');
    } else {
      throw bad("unknown header key '" + key + "'");
    }
  }
  if (t.role_id.empty() || !saw_placeholders) throw bad("header needs role= and placeholders=");

  std::string_view body = text.substr(nl + 1);
  constexpr std::string_view sys_mark = "@system\n", user_mark = "@user\n";
  if (!util::starts_with(body, sys_mark)) throw bad("expected @system section");
  body.remove_prefix(sys_mark.size());
  if (util::starts_with(body, user_mark)) {
    body.remove_prefix(user_mark.size());
  } else {
    auto at = body.find("\n@user\n");
    if (at == std::string_view::npos) throw bad("expected @user section");
    t.system_text = std::string(body.substr(0, at));
    body.remove_prefix(at + 1 + user_mark.size());
  }
  if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  t.user_template = std::string(body);

  auto used = placeholders_in(t.user_template);
  std::set<std::string> a(used.begin(), used.end()), b(t.placeholders.begin(), t.placeholders.end());
  if (a != b) throw bad("placeholder header does not match the template body");
  if (t.role_id != "basic_logic" && t.system_text.empty()) throw bad("system text is empty");
  return t;
}

PromptTemplate load_template(std::string_view name) {
  const auto& files = detail::embedded_files();
  auto it = files.find(std::string(name) + ".tmpl");
  if (it == files.end()) throw InvalidTemplate("no shipped template '" + std::string(name) + "'");
  return parse_template(name, it->second);
}

std::vector<std::string> template_names() {
  std::vector<std::string> out;
  for (const auto& [file, text] : detail::embedded_files()) {
    std::string_view f = file;
    if (f.size() > 5 && f.substr(f.size() - 5) == ".tmpl") out.emplace_back(f.substr(0, f.size() - 5));
  }
  return out;
}

PromptBundle render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values) {
  for (const auto& p : tmpl.placeholders)
    if (!values.count(p)) throw MissingPlaceholder(p);
  for (const auto& [k, v] : values)
    if (std::find(tmpl.placeholders.begin(), tmpl.placeholders.end(), k) == tmpl.placeholders.end())
      throw ExtraPlaceholder(k);

  PromptBundle out;
  out.role_id = tmpl.role_id;
  out.system_text = tmpl.system_text;
  out.substitutions = values;
  const std::string& src = tmpl.user_template;
  std::size_t pos = 0;
  while (pos < src.size()) {
    auto open = src.find('{', pos);
    if (open == std::string::npos) break;
    auto close = src.find('}', open + 1);
    if (close == std::string::npos) break;
    auto it = values.find(src.substr(open + 1, close - open - 1));
    if (it == values.end()) {
      out.user_text.append(src, pos, open + 1 - pos);
      pos = open + 1;
      continue;
    }
    out.user_text.append(src, pos, open - pos);
    out.user_text += it->second;
    pos = close + 1;
  }
  out.user_text.append(src, pos, std::string::npos);
  return out;
}

PromptBundle basic_logic_prompt(LogicBlock block, PromptVariant variant) {
  static constexpr const char* names[] = {"and", "or", "not", "switch"};
  std::string name = std::string("basic_") + names[static_cast<int>(block)] +
                     (variant == PromptVariant::a_minimal ? "_a" : "_b");
  return render(load_template(name), {});
}

namespace {

std::string port_text(const TaskPort& p) {
  std::string s = p.name + " (" + std::string(to_string(p.kind));
  if (!p.unit.empty()) s += ", unit " + p.unit;
  if (!p.description.empty()) s += ", " + p.description;
  return s + ")";
}

std::string listing(const std::vector<std::string>& items) {
  return items.empty() ? "none" : util::join(items, ", ");
}

}  // namespace

std::string control_task_prompt(const ReferenceTask& task) {
  std::vector<std::string> ins, outs, params;
  for (const auto& p : task.inputs) ins.push_back(port_text(p));
  for (const auto& p : task.outputs) outs.push_back(port_text(p));
  for (const auto& p : task.params) {
    std::string s = p.name + " = " + util::format_real(p.value);
    if (!p.unit.empty()) s += " " + p.unit;
    if (!p.description.empty()) s += " (" + p.description + ")";
    params.push_back(s);
  }
  std::ostringstream os;
  os << "Please " << task.goal << ". The inputs are " << listing(ins) << ". The outputs are "
     << listing(outs) << ". The parameters are " << listing(params) << ". The control sequence is:";
  for (std::size_t i = 0; i < task.rules.size(); ++i) os << '\n' << i + 1 << ". " << task.rules[i];
  return os.str();
}

std::string module_name_list(const LibraryIndex& index) {
  std::set<std::string> names;
  for (const auto& e : index.entries()) names.insert(e.fqn.terminal());
  return util::join(std::vector<std::string>(names.begin(), names.end()), "\n");
}

std::string module_list(const std::vector<std::string>& fqns) { return util::join(fqns, ", "); }

}  // namespace cdlgen
