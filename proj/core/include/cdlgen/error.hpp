#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cdlgen {

// Base for every failure the toolchain reports by exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// modelica-ast

class SyntaxError : public Error {
 public:
  SyntaxError(int line, int column, std::string message,
              std::vector<std::string> expected = {});

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  int line_;
  int column_;
  std::string detail_;
  std::vector<std::string> expected_;
};

class UnsupportedConstruct : public Error {
 public:
  UnsupportedConstruct(int line, int column, std::string construct);
  const std::string& construct() const noexcept { return construct_; }
  int line() const noexcept { return line_; }

 private:
  int line_;
  std::string construct_;
};

// A block that parses but breaks a structural invariant (duplicate names,
// attributes on a non-Real connector, min > max, ...).
class InvalidBlock : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// library-index

class EmptyIndex : public Error {
 public:
  using Error::Error;
};

class IndexFormatError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// prompt-engine

class MissingPlaceholder : public Error {
 public:
  explicit MissingPlaceholder(std::string name);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class ExtraPlaceholder : public Error {
 public:
  explicit ExtraPlaceholder(std::string name);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

// A template file whose header and body disagree.
class InvalidTemplate : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// llm-gateway

class ReplayMiss : public Error {
 public:
  explicit ReplayMiss(std::string request_key);
  const std::string& request_key() const noexcept { return key_; }

 private:
  std::string key_;
};

class ProviderError : public Error {
 public:
  ProviderError(int status, std::string body_excerpt);
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class Timeout : public Error {
 public:
  explicit Timeout(double seconds);
};

class EmptyCode : public Error {
 public:
  EmptyCode() : Error("response contains no code") {}
};

// ---------------------------------------------------------------------------
// block-interpreter

class ElaborationError : public Error {
 public:
  using Error::Error;
};

class UnknownBehavior : public ElaborationError {
 public:
  explicit UnknownBehavior(std::string fqn);
  const std::string& fqn() const noexcept { return fqn_; }

 private:
  std::string fqn_;
};

class UnresolvedPort : public ElaborationError {
 public:
  UnresolvedPort(std::string path, std::string reason);
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class AlgebraicLoop : public ElaborationError {
 public:
  explicit AlgebraicLoop(std::vector<std::string> instances);
  const std::vector<std::string>& instances() const noexcept { return instances_; }

 private:
  std::vector<std::string> instances_;
};

class KindMismatch : public Error {
 public:
  KindMismatch(std::string port, std::string reason);
  const std::string& port() const noexcept { return port_; }

 private:
  std::string port_;
};

class SimulationError : public Error {
 public:
  using Error::Error;
};

class UnknownPort : public Error {
 public:
  explicit UnknownPort(std::string path);
};

// ---------------------------------------------------------------------------
// static-validator

class NotInjectable : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// orchestrator

class NoModulesSelected : public Error {
 public:
  NoModulesSelected() : Error("no selected module name matched the library index") {}
};

class ToolchainUnavailable : public Error {
 public:
  explicit ToolchainUnavailable(std::string command);
};

class TaskFormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// evaluation

class FormInvalid : public Error {
 public:
  FormInvalid(std::string field, std::string reason);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class UnparseableVerdict : public Error {
 public:
  explicit UnparseableVerdict(std::string reply);
  const std::string& reply() const noexcept { return reply_; }

 private:
  std::string reply_;
};

}  // namespace cdlgen
