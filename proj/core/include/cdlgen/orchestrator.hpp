#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cdlgen/config.hpp"
#include "cdlgen/gateway.hpp"
#include "cdlgen/library_index.hpp"
#include "cdlgen/session.hpp"
#include "cdlgen/task.hpp"

namespace cdlgen {

// Names from a bullet-list reply: leading bullet glyphs, numbering, bold and
// backticks are stripped; comma-separated names on one line are split.
std::vector<std::string> parse_bullet_names(std::string_view reply);

struct SelectionResult {
  std::vector<SelectedModule> modules;
  std::vector<std::string> notes;
  TranscriptEntry call;
};

// Asks the control-expert role for modules and grounds every name in the
// index. Throws NoModulesSelected when nothing resolves.
SelectionResult select_modules(const ReferenceTask& task, const LibraryIndex& index, Gateway& gateway,
                               const std::string& model_id, bool fuzzy = false, int max_tokens = 4096);

struct CompileOutcome {
  bool ok = false;
  std::string log;
};

// Writes the source to a temp file, renders the check script and runs
// `command <script>`. Throws ToolchainUnavailable when the command is absent.
CompileOutcome compile_external(std::string_view source, const ToolchainConfig& toolchain);

// Deterministic for a given task and config.
std::string session_id_for(const ReferenceTask& task, const Config& config);

// Never throws for pipeline failures; they end up in status and cause.
GenerationSession run_session(const ReferenceTask& task, const LibraryIndex& index, const Config& config,
                              Gateway& gateway);

std::string format_transcript(const GenerationSession& session);
std::string format_summary(const GenerationSession& session);

// <root>/<session_id>/ with transcript.txt, artifacts/, diagnostics/,
// traces/, session.summary, conformance.txt and a separate timestamp file.
// Replaces an existing directory of the same id. Returns the session dir.
std::filesystem::path write_session_dir(const GenerationSession& session, const std::filesystem::path& root);

}  // namespace cdlgen
