#include "cdlgen/library_index.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "cdlgen/error.hpp"
#include "util.hpp"

namespace cdlgen {

namespace fs = std::filesystem;

bool LibraryEntry::has_parameter(std::string_view name) const {
  return std::find(parameter_names.begin(), parameter_names.end(), name) != parameter_names.end();
}

LibraryIndex::LibraryIndex(std::string version, std::vector<LibraryEntry> entries,
                           std::vector<RenameRule> renames)
    : version_(std::move(version)), entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const LibraryEntry& a, const LibraryEntry& b) { return a.fqn.str() < b.fqn.str(); });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto [it, inserted] = by_fqn_.emplace(entries_[i].fqn.str(), i);
    if (!inserted) throw IndexFormatError("duplicate class " + it->first);
  }
  set_renames(std::move(renames));
}

const LibraryEntry* LibraryIndex::find(std::string_view fqn) const {
  auto it = by_fqn_.find(fqn);
  return it == by_fqn_.end() ? nullptr : &entries_[it->second];
}

const LibraryEntry* LibraryIndex::find(const QualifiedName& fqn) const { return find(fqn.str()); }

namespace {

QualifiedName rewrite(const QualifiedName& name, const RenameRule& rule) {
  std::vector<std::string> segs = rule.new_prefix.segments();
  const auto& old = name.segments();
  segs.insert(segs.end(), old.begin() + static_cast<std::ptrdiff_t>(rule.old_prefix.segments().size()),
              old.end());
  return QualifiedName(std::move(segs));
}

// Longest old prefix wins.
const RenameRule* best_rule(const std::vector<RenameRule>& rules, const QualifiedName& name) {
  const RenameRule* best = nullptr;
  for (const auto& r : rules)
    if (name.has_prefix(r.old_prefix) &&
        (!best || r.old_prefix.segments().size() > best->old_prefix.segments().size()))
      best = &r;
  return best;
}

}  // namespace

void LibraryIndex::set_renames(std::vector<RenameRule> renames) {
  for (const auto& r : renames) {
    bool target = std::any_of(entries_.begin(), entries_.end(),
                              [&](const LibraryEntry& e) { return e.fqn.has_prefix(r.new_prefix); });
    if (!target)
      throw IndexFormatError("rename target " + r.new_prefix.str() + " has no entries in the index");
  }
  for (const auto& r : renames) {
    std::set<QualifiedName> seen{r.old_prefix};
    QualifiedName cur = r.old_prefix;
    while (const RenameRule* next = best_rule(renames, cur)) {
      cur = rewrite(cur, *next);
      if (!seen.insert(cur).second)
        throw IndexFormatError("rename map cycle through " + r.old_prefix.str());
    }
  }
  renames_ = std::move(renames);
}

// ---------------------------------------------------------------------------
// build

namespace {

std::string doc_text_of(const ModelicaBlock& b) {
  std::vector<std::string> parts;
  if (b.doc) parts.push_back(*b.doc);
  for (const auto& c : b.connectors)
    if (c.doc) parts.push_back(*c.doc);
  for (const auto& p : b.parameters)
    if (p.doc) parts.push_back(*p.doc);
  for (const auto& i : b.instances)
    if (i.doc) parts.push_back(*i.doc);
  return util::join(parts, " ");
}

LibraryEntry entry_from(const ModelicaBlock& b, const std::string& version, std::string source_path) {
  LibraryEntry e;
  e.fqn = b.fqn();
  e.kind = b.kind;
  e.interface = interface_of(b);
  for (const auto& p : b.parameters) e.parameter_names.push_back(p.name);
  e.doc_text = doc_text_of(b);
  e.library_version = version;
  e.source_path = std::move(source_path);
  return e;
}

}  // namespace

IndexBuild build_index(const fs::path& root, const std::string& version) {
  std::vector<fs::path> files;
  if (fs::is_directory(root))
    for (const auto& de : fs::recursive_directory_iterator(root))
      if (de.is_regular_file() && de.path().extension() == ".mo") files.push_back(de.path());
  std::sort(files.begin(), files.end());

  IndexBuild out;
  std::vector<LibraryEntry> entries;
  std::set<std::string> seen;
  for (const auto& f : files) {
    std::string rel = f.lexically_relative(root).generic_string();
    try {
      ModelicaBlock b = parse(util::read_file(f));
      // Without a within clause the package path comes from the directory.
      if (!b.within) {
        std::vector<std::string> segs;
        for (const auto& part : f.parent_path().lexically_relative(root))
          if (part != ".") segs.push_back(part.string());
        if (!segs.empty()) b.within = QualifiedName(segs);
      }
      if (!seen.insert(b.fqn().str()).second) {
        out.warnings.push_back({rel, "duplicate class " + b.fqn().str()});
        continue;
      }
      entries.push_back(entry_from(b, version, rel));
    } catch (const Error& e) {
      out.warnings.push_back({rel, e.what()});
    }
  }
  if (entries.empty()) throw EmptyIndex("no parseable classes under " + root.string());
  out.index = LibraryIndex(version, std::move(entries));
  return out;
}

// ---------------------------------------------------------------------------
// retrieval

std::vector<std::string> retrieval_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto c = static_cast<unsigned char>(text[i]);
    if (!std::isalnum(c)) {
      flush();
      continue;
    }
    if (std::isupper(c) && !cur.empty()) {
      auto prev = static_cast<unsigned char>(text[i - 1]);
      bool next_lower = i + 1 < text.size() && std::islower(static_cast<unsigned char>(text[i + 1]));
      if (std::islower(prev) || std::isdigit(prev) || (std::isupper(prev) && next_lower)) flush();
    }
    cur += static_cast<char>(std::tolower(c));
  }
  flush();
  return out;
}

RetrievalResult hard_rule_lookup(const LibraryIndex& index, std::string_view name) {
  RetrievalResult r;
  r.query = std::string(name);
  r.mode = RetrievalMode::hard_rule;
  r.exact = true;
  bool qualified = name.find('.') != std::string_view::npos;
  for (const auto& e : index.entries()) {
    bool hit = qualified ? e.fqn.str() == name : e.fqn.terminal() == name;
    if (hit) r.hits.push_back({e.fqn.str(), 1.0});
  }
  return r;
}

RetrievalResult baseline_fuzzy_search(const LibraryIndex& index, std::string_view query,
                                      std::size_t k) {
  RetrievalResult r;
  r.query = std::string(query);
  r.mode = RetrievalMode::baseline_fuzzy;
  r.exact = false;
  auto qt = retrieval_tokens(query);
  std::set<std::string> q(qt.begin(), qt.end());
  std::string lowered_query = util::to_lower(query);

  for (const auto& e : index.entries()) {
    double score = 0;
    if (util::to_lower(e.fqn.str()) == lowered_query) {
      score = 1.0;
    } else {
      auto dt = retrieval_tokens(e.fqn.str() + " " + e.doc_text);
      std::set<std::string> d(dt.begin(), dt.end());
      std::size_t inter = 0;
      for (const auto& t : q) inter += d.count(t);
      std::size_t uni = q.size() + d.size() - inter;
      if (uni != 0) score = static_cast<double>(inter) / static_cast<double>(uni);
    }
    if (score > 0) r.hits.push_back({e.fqn.str(), score});
  }
  std::stable_sort(r.hits.begin(), r.hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.fqn < b.fqn;
  });
  if (r.hits.size() > k) r.hits.resize(k);
  return r;
}

VersionResolution resolve_version(const LibraryIndex& index, const QualifiedName& fqn) {
  VersionResolution out;
  if (index.find(fqn)) {
    out.status = VersionResolution::Status::found;
    out.fqn = fqn;
    return out;
  }
  if (const RenameRule* rule = best_rule(index.renames(), fqn)) {
    QualifiedName renamed = rewrite(fqn, *rule);
    if (index.find(renamed)) {
      out.status = VersionResolution::Status::renamed;
      out.fqn = renamed;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// persistence

namespace {

constexpr std::string_view kHeader = "#cdl-index v1 ";

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    char n = s[++i];
    out += n == 't' ? '\t' : n == 'n' ? '\n' : n;
  }
  return out;
}

}  // namespace

std::string format_index(const LibraryIndex& index, const fs::path& library_root,
                         const fs::path& index_dir) {
  fs::path root = fs::weakly_canonical(fs::absolute(library_root));
  fs::path dir = fs::weakly_canonical(fs::absolute(index_dir));
  std::ostringstream os;
  os << kHeader << index.version() << '\n';
  for (const auto& e : index.entries()) {
    fs::path src = (root / e.source_path).lexically_relative(dir);
    os << e.fqn.str() << '\t' << to_string(e.kind) << '\t' << e.interface.inputs.size() << '\t'
       << e.interface.outputs.size() << '\t' << escape(src.generic_string()) << '\t'
       << escape(e.doc_text) << '\n';
  }
  return os.str();
}

void write_index_file(const LibraryIndex& index, const fs::path& library_root, const fs::path& out) {
  fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  util::write_file(out, format_index(index, library_root, dir));
}

LibraryIndex load_index_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IndexFormatError("cannot read index file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind(kHeader, 0) != 0)
    throw IndexFormatError(path.string() + ": missing '#cdl-index v1' header");
  std::string version = line.substr(kHeader.size());
  fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");

  std::vector<LibraryEntry> entries;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = util::split(line, '\t');
    auto where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() != 6) throw IndexFormatError(where + ": expected 6 fields");
    fs::path src = dir / unescape(fields[4]);
    ModelicaBlock b;
    try {
      b = parse(util::read_file(src));
    } catch (const Error& e) {
      throw IndexFormatError(where + ": cannot load " + src.generic_string() + ": " + e.what());
    }
    LibraryEntry e = entry_from(b, version, unescape(fields[4]));
    e.fqn = QualifiedName::parse(fields[0]);
    e.doc_text = unescape(fields[5]);
    if (std::to_string(e.interface.inputs.size()) != fields[2] ||
        std::to_string(e.interface.outputs.size()) != fields[3])
      throw IndexFormatError(where + ": interface of " + fields[0] + " no longer matches its source");
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw EmptyIndex(path.string() + " has no entries");
  return LibraryIndex(version, std::move(entries));
}

std::vector<RenameRule> parse_rename_map(std::string_view text) {
  std::vector<RenameRule> out;
  int lineno = 0;
  for (const auto& raw : util::split(text, '\n')) {
    ++lineno;
    std::string line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto f = util::split(line, '\t');
    if (f.size() != 2)
      throw IndexFormatError("rename map line " + std::to_string(lineno) + ": expected old<TAB>new");
    try {
      out.push_back({QualifiedName::parse(util::trim(f[0])), QualifiedName::parse(util::trim(f[1]))});
    } catch (const InvalidBlock& e) {
      throw IndexFormatError("rename map line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RenameRule> load_rename_map(const fs::path& path) {
  return parse_rename_map(util::read_file(path));
}

}  // namespace cdlgen
