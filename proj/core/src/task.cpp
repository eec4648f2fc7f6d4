#include "cdlgen/task.hpp"

#include <cctype>
#include <set>

#include "cdlgen/error.hpp"
#include "embedded.hpp"
#include "util.hpp"

namespace cdlgen {

const TaskParam* ReferenceTask::find_param(std::string_view name) const {
  for (const auto& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

const TaskPort* ReferenceTask::find_input(std::string_view name) const {
  for (const auto& p : inputs)
    if (p.name == name) return &p;
  return nullptr;
}

namespace {

SignalKind kind_from(const std::string& s, int line) {
  if (s == "Real") return SignalKind::Real;
  if (s == "Boolean") return SignalKind::Boolean;
  if (s == "Integer") return SignalKind::Integer;
  throw TaskFormatError("line " + std::to_string(line) + ": unknown signal kind '" + s + "'");
}

std::vector<std::string> fields(const std::string& value, std::size_t n, int line) {
  auto f = util::split(value, '|');
  if (f.size() != n)
    throw TaskFormatError("line " + std::to_string(line) + ": expected " + std::to_string(n) +
                          " '|'-separated fields");
  for (auto& x : f) x = util::trim(x);
  return f;
}

double number(const std::string& s, int line) {
  auto v = util::parse_double(s);
  if (!v) throw TaskFormatError("line " + std::to_string(line) + ": '" + s + "' is not a number");
  return *v;
}

std::map<std::string, double> probe_values(const std::string& value, int line) {
  std::map<std::string, double> out;
  for (const auto& item : util::split(value, ';')) {
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw TaskFormatError("line " + std::to_string(line) + ": probe entries are name=value");
    out[util::trim(item.substr(0, eq))] = number(util::trim(item.substr(eq + 1)), line);
  }
  return out;
}

bool looks_like_symbol(const std::string& w) {
  if (w.size() < 2 || !(std::isalpha(static_cast<unsigned char>(w[0])))) return false;
  if (w.find('_') != std::string::npos) return true;
  for (std::size_t i = 1; i < w.size(); ++i)
    if (std::isupper(static_cast<unsigned char>(w[i])) &&
        std::islower(static_cast<unsigned char>(w[i - 1])))
      return true;
  return false;
}

}  // namespace

std::vector<std::string> undeclared_symbols(const ReferenceTask& task) {
  std::set<std::string> declared;
  for (const auto& p : task.inputs) declared.insert(p.name);
  for (const auto& p : task.outputs) declared.insert(p.name);
  for (const auto& p : task.params) declared.insert(p.name);
  std::set<std::string> missing;
  for (const auto& rule : task.rules) {
    std::string word;
    auto flush = [&] {
      if (looks_like_symbol(word) && !declared.count(word)) missing.insert(word);
      word.clear();
    };
    for (char c : rule) {
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_')
        word += c;
      else
        flush();
    }
    flush();
  }
  return {missing.begin(), missing.end()};
}

ReferenceTask parse_task(std::string_view text) {
  ReferenceTask t;
  int line = 0;
  std::string polarity;
  for (const auto& raw : util::split(text, '\n')) {
    ++line;
    std::string l = util::trim(raw);
    if (l.empty() || l[0] == '#') continue;
    auto eq = l.find('=');
    if (eq == std::string::npos)
      throw TaskFormatError("line " + std::to_string(line) + ": expected key=value");
    std::string key = util::trim(l.substr(0, eq));
    std::string value = util::trim(l.substr(eq + 1));
    if (key == "id") {
      t.id = value;
    } else if (key == "title") {
      t.title = value;
    } else if (key == "goal") {
      t.goal = value;
    } else if (key == "input" || key == "output") {
      auto f = fields(value, 4, line);
      if (!is_identifier(f[0]))
        throw TaskFormatError("line " + std::to_string(line) + ": '" + f[0] + "' is not an identifier");
      (key == "input" ? t.inputs : t.outputs).push_back({f[0], kind_from(f[1], line), f[2], f[3]});
    } else if (key == "param") {
      auto f = fields(value, 4, line);
      t.params.push_back({f[0], number(f[1], line), f[2], f[3]});
    } else if (key == "rule") {
      t.rules.push_back(value);
    } else if (key == "oracle") {
      t.oracle_id = value;
    } else if (key == "polarity") {
      auto f = fields(value, 3, line);
      if (f[2] != "+" && f[2] != "-")
        throw TaskFormatError("line " + std::to_string(line) + ": polarity sign must be + or -");
      t.polarity = Polarity{f[0], f[1], f[2] == "+" ? 1 : -1};
    } else if (key == "probe.low") {
      t.probe_low = probe_values(value, line);
    } else if (key == "probe.high") {
      t.probe_high = probe_values(value, line);
    } else {
      throw TaskFormatError("line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
  }
  if (t.id.empty()) throw TaskFormatError("task has no id");
  if (t.goal.empty()) throw TaskFormatError("task " + t.id + " has no goal");
  if (t.outputs.empty()) throw TaskFormatError("task " + t.id + " declares no outputs");
  if (t.rules.empty()) throw TaskFormatError("task " + t.id + " has no sequence rules");
  auto missing = undeclared_symbols(t);
  if (!missing.empty())
    throw TaskFormatError("task " + t.id + " rules use undeclared symbols: " + util::join(missing, ", "));
  if (t.polarity) {
    bool out_ok = false;
    for (const auto& o : t.outputs) out_ok |= o.name == t.polarity->output;
    if (!out_ok || !t.find_input(t.polarity->error_input))
      throw TaskFormatError("task " + t.id + ": polarity names unknown ports");
    for (const auto& in : t.inputs)
      if (!t.probe_low.count(in.name) || !t.probe_high.count(in.name))
        throw TaskFormatError("task " + t.id + ": probe does not set input " + in.name);
  }
  return t;
}

std::vector<std::string> shipped_task_ids() {
  std::vector<std::string> ids;
  for (const auto& [name, text] : detail::embedded_files()) {
    std::string_view n = name;
    if (n.size() > 5 && n.substr(n.size() - 5) == ".task") ids.emplace_back(n.substr(4, n.size() - 9));
  }
  return ids;
}

ReferenceTask load_task(std::string_view id_or_path) {
  const auto& files = detail::embedded_files();
  auto it = files.find("task" + std::string(id_or_path) + ".task");
  if (it != files.end() && id_or_path.find('/') == std::string_view::npos)
    return parse_task(it->second);
  std::string text;
  try {
    text = util::read_file(std::string(id_or_path));
  } catch (const Error&) {
    throw TaskFormatError("no shipped task '" + std::string(id_or_path) + "' and no such task file");
  }
  return parse_task(text);
}

InterfaceSignature task_interface(const ReferenceTask& task) {
  InterfaceSignature sig;
  for (const auto& p : task.inputs) sig.inputs.push_back({p.name, p.kind, Direction::input, false});
  for (const auto& p : task.outputs) sig.outputs.push_back({p.name, p.kind, Direction::output, false});
  return sig;
}

}  // namespace cdlgen
