#pragma once

#include <stdexcept>
#include <string>

namespace rppcert {

enum class ErrorKind {
  InvalidArgument,
  Domain,
  Parse,
  Io,
  Precondition,
  Provenance,
  Training,
  Internal,
};

/// Base of every exception thrown by the library. The kind selects the
/// status code reported across the C boundary.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::InvalidArgument, what) {}
};

/// Argument outside the mathematical domain of a kernel (e.g. p not in (0,1)).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorKind::Parse, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

/// A stage was invoked on inputs that do not satisfy its preconditions.
class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorKind::Precondition, what) {}
};

/// Scores, profiles or models were produced under incompatible settings.
class ProvenanceError : public Error {
 public:
  explicit ProvenanceError(const std::string& what) : Error(ErrorKind::Provenance, what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error(ErrorKind::Training, what) {}
};

}  // namespace rppcert
