#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tokamata {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed textual input: regex patterns, grammar files, vocabulary files,
// schema documents. `position` is a byte offset into the offending text when
// one is known, npos otherwise.
struct ParseError : Error {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t position;
  ParseError(const std::string& what, std::size_t pos = npos)
      : Error(pos == npos ? what : what + " (at byte " + std::to_string(pos) + ")"),
        position(pos) {}
};

// A configurable cap was exceeded (determinization state cap, search budgets,
// stack-edit depth). The message names the cap and its value.
struct ResourceLimitError : Error {
  using Error::Error;
};

// An internal invariant did not hold. Indicates a construction bug, not bad
// user input.
struct IntegrityError : Error {
  using Error::Error;
};

// An operation was called with arguments that violate its stated
// preconditions (mismatched alphabets, wrong vector lengths, bad state ids).
struct PreconditionError : Error {
  using Error::Error;
};

// A grammar fails the determinism checks; what() carries the conflict
// report.
struct DeterminismError : PreconditionError {
  using PreconditionError::PreconditionError;
};

// A token was fed to a constraint that does not allow it in the current
// configuration.
struct ConstraintViolation : Error {
  std::uint32_t token;
  std::uint32_t state;
  ConstraintViolation(const std::string& what, std::uint32_t token_id, std::uint32_t state_id)
      : Error(what), token(token_id), state(state_id) {}
};

// A serialized constraint was loaded against a vocabulary other than the one
// it was compiled for.
struct VocabularyMismatch : Error {
  using Error::Error;
};

// A JSON schema uses features outside the supported subset (references,
// recursion, unknown types).
struct SchemaError : Error {
  using Error::Error;
};

}  // namespace tokamata
