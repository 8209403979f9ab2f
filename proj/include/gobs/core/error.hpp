#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gobs {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration document failed to parse or holds an out-of-range value.
// key() names the offending key (dotted path), empty for parse failures.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Rule set failed validation (duplicate id, bad template, bad rigidity, ...).
class RuleError : public Error {
 public:
  RuleError(std::string rule_id, const std::string& what)
      : Error(rule_id.empty() ? what : "rule '" + rule_id + "': " + what),
        rule_id_(std::move(rule_id)) {}
  const std::string& rule_id() const noexcept { return rule_id_; }

 private:
  std::string rule_id_;
};

// Caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Malformed input data (corpus, annotations, statistics input).
// line() is 1-based, 0 when not tied to a line.
class DataError : public Error {
 public:
  DataError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  const std::size_t& line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Upstream model or embedding service failed (after retries where applicable).
class TransportError : public Error {
 public:
  using Error::Error;
};

// Upstream replied with something that is not a valid chat/embedding response.
class MalformedReplyError : public TransportError {
 public:
  using TransportError::TransportError;
};

// A scripted provider ran out of responses.
class ScriptExhaustedError : public Error {
 public:
  using Error::Error;
};

}  // namespace gobs
