#pragma once

#include <stdexcept>
#include <string>

namespace catlab {

enum class ErrorKind {
  ZeroRow,
  EmptyVocab,
  InfeasibleSpec,
  LengthMismatch,
  TooLarge,
  SignatureNotUnique,
  NonTermination,
  StructureViolation,
  DegenerateVocab,
  InvalidConfig,
  InvalidInput,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; `kind()` lets callers branch on the
// failure without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Carries the offending row so constructions can report which token degenerated.
class ZeroRowError : public Error {
 public:
  explicit ZeroRowError(long row)
      : Error(ErrorKind::ZeroRow, "row " + std::to_string(row) + " has norm below floor"), row_(row) {}
  long row() const noexcept { return row_; }

 private:
  long row_;
};

}  // namespace catlab
