#include "cdlgen/session.hpp"

namespace cdlgen {

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::converged: return "converged";
    case SessionStatus::failed_max_iterations: return "failed_max_iterations";
    case SessionStatus::failed_unrecoverable: return "failed_unrecoverable";
  }
  return "failed_unrecoverable";
}

std::optional<SessionStatus> session_status_from(std::string_view name) {
  for (auto s : {SessionStatus::converged, SessionStatus::failed_max_iterations, SessionStatus::failed_unrecoverable})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

std::string_view to_string(Provenance p) { return p == Provenance::hard_rule ? "hard_rule" : "fuzzy"; }

std::vector<ChatResponse> GenerationSession::responses() const {
  std::vector<ChatResponse> out;
  out.reserve(transcript.size());
  for (const auto& t : transcript) out.push_back(t.response);
  return out;
}

}  // namespace cdlgen
