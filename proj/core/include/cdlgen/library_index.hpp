#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdlgen/ast.hpp"

namespace cdlgen {

struct LibraryEntry {
  QualifiedName fqn;
  BlockKind kind = BlockKind::block;
  InterfaceSignature interface;
  std::vector<std::string> parameter_names;
  std::string doc_text;
  std::string library_version;
  std::string source_path;  // relative to the library root

  bool has_parameter(std::string_view name) const;
};

struct RenameRule {
  QualifiedName old_prefix;
  QualifiedName new_prefix;
};

class LibraryIndex {
 public:
  LibraryIndex() = default;
  LibraryIndex(std::string version, std::vector<LibraryEntry> entries,
               std::vector<RenameRule> renames = {});

  const std::string& version() const noexcept { return version_; }
  // Lexicographic by fqn.
  const std::vector<LibraryEntry>& entries() const noexcept { return entries_; }
  const std::vector<RenameRule>& renames() const noexcept { return renames_; }
  bool empty() const noexcept { return entries_.empty(); }

  const LibraryEntry* find(const QualifiedName& fqn) const;
  const LibraryEntry* find(std::string_view fqn) const;

  // Throws IndexFormatError when a rename target is missing or the rules
  // form a cycle.
  void set_renames(std::vector<RenameRule> renames);

 private:
  std::string version_;
  std::vector<LibraryEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> by_fqn_;
  std::vector<RenameRule> renames_;
};

struct IndexWarning {
  std::string source_path;
  std::string message;
};

struct IndexBuild {
  LibraryIndex index;
  std::vector<IndexWarning> warnings;
};

// Parses every `.mo` file below `root`. Unparseable files are skipped with a
// warning; throws EmptyIndex when nothing parses.
IndexBuild build_index(const std::filesystem::path& root, const std::string& version);

enum class RetrievalMode { hard_rule, baseline_fuzzy };

struct RetrievalHit {
  std::string fqn;
  double score = 0;
  friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

struct RetrievalResult {
  std::string query;
  RetrievalMode mode = RetrievalMode::hard_rule;
  std::vector<RetrievalHit> hits;
  bool exact = true;

  bool found() const { return !hits.empty(); }
  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

// Exact match on the full class path, or on the terminal segment when `name`
// is unqualified. Case-sensitive. Empty hits means NotFound.
RetrievalResult hard_rule_lookup(const LibraryIndex& index, std::string_view name);

// Token-overlap retrieval (Jaccard over lower-cased word tokens of fqn and
// doc text). Kept only as the comparison baseline; it can confuse And/Or.
RetrievalResult baseline_fuzzy_search(const LibraryIndex& index, std::string_view query,
                                      std::size_t k);

// Lower-cased word tokens; camelCase words are split (GreaterThreshold ->
// greater, threshold).
std::vector<std::string> retrieval_tokens(std::string_view text);

struct VersionResolution {
  enum class Status { found, renamed, unknown };
  Status status = Status::unknown;
  std::optional<QualifiedName> fqn;  // set for found and renamed
};

VersionResolution resolve_version(const LibraryIndex& index, const QualifiedName& fqn);

// Index file: `#cdl-index v1 <version>` header then one tab-separated record
// per entry. Source paths are written relative to the index file directory.
void write_index_file(const LibraryIndex& index, const std::filesystem::path& library_root,
                      const std::filesystem::path& out);
std::string format_index(const LibraryIndex& index, const std::filesystem::path& library_root,
                         const std::filesystem::path& index_dir);

// Loads an index file. Each record's source is re-parsed to recover the full
// interface; a missing source or a changed port count is an IndexFormatError.
LibraryIndex load_index_file(const std::filesystem::path& path);

std::vector<RenameRule> parse_rename_map(std::string_view text);
std::vector<RenameRule> load_rename_map(const std::filesystem::path& path);

}  // namespace cdlgen
