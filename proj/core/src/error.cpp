#include "cdlgen/error.hpp"

#include <sstream>

namespace cdlgen {

namespace {

std::string syntax_message(int line, int column, const std::string& message,
                           const std::vector<std::string>& expected) {
  std::ostringstream os;
  os << line << ":" << column << ": syntax error: " << message;
  if (!expected.empty()) {
    os << " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i != 0) os << (i + 1 == expected.size() ? " or " : ", ");
      os << expected[i];
    }
    os << ")";
  }
  return os.str();
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += sep;
    out += item;
  }
  return out;
}

}  // namespace

SyntaxError::SyntaxError(int line, int column, std::string message,
                         std::vector<std::string> expected)
    : Error(syntax_message(line, column, message, expected)),
      line_(line),
      column_(column),
      detail_(std::move(message)),
      expected_(std::move(expected)) {}

UnsupportedConstruct::UnsupportedConstruct(int line, int column, std::string construct)
    : Error(std::to_string(line) + ":" + std::to_string(column) +
            ": unsupported construct '" + construct + "'"),
      line_(line),
      construct_(std::move(construct)) {}

MissingPlaceholder::MissingPlaceholder(std::string name)
    : Error("missing value for placeholder {" + name + "}"), name_(std::move(name)) {}

ExtraPlaceholder::ExtraPlaceholder(std::string name)
    : Error("value supplied for unknown placeholder {" + name + "}"),
      name_(std::move(name)) {}

ReplayMiss::ReplayMiss(std::string request_key)
    : Error("cassette has no response for request " + request_key),
      key_(std::move(request_key)) {}

ProviderError::ProviderError(int status, std::string body_excerpt)
    : Error("provider returned status " + std::to_string(status) + ": " + body_excerpt),
      status_(status) {}

Timeout::Timeout(double seconds)
    : Error("request timed out after " + std::to_string(seconds) + " s") {}

UnknownBehavior::UnknownBehavior(std::string fqn)
    : ElaborationError("no registered behavior for class " + fqn), fqn_(std::move(fqn)) {}

UnresolvedPort::UnresolvedPort(std::string path, std::string reason)
    : ElaborationError("unresolved port " + path + ": " + reason), path_(std::move(path)) {}

AlgebraicLoop::AlgebraicLoop(std::vector<std::string> instances)
    : ElaborationError("algebraic loop through " + join(instances, ", ")),
      instances_(std::move(instances)) {}

KindMismatch::KindMismatch(std::string port, std::string reason)
    : Error("kind mismatch at " + port + ": " + reason), port_(std::move(port)) {}

UnknownPort::UnknownPort(std::string path) : Error("unknown port " + path) {}

ToolchainUnavailable::ToolchainUnavailable(std::string command)
    : Error("external toolchain not available: " + command) {}

FormInvalid::FormInvalid(std::string field, std::string reason)
    : Error("invalid evaluation form field '" + field + "': " + reason),
      field_(std::move(field)) {}

UnparseableVerdict::UnparseableVerdict(std::string reply)
    : Error("evaluator reply is neither yes nor no"), reply_(std::move(reply)) {}

}  // namespace cdlgen
