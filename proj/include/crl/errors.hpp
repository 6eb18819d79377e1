#pragma once

#include <stdexcept>
#include <string>

namespace crl {

// Error categories used across the library. The CLI maps these to exit
// codes and single-line "error: <category>: <message>" output.

struct Error : std::runtime_error {
  Error(const std::string& category, const std::string& msg)
      : std::runtime_error("error: " + category + ": " + msg), category_(category) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

// Bad user-supplied configuration (priors, fractions, model shapes, ...).
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

// Malformed or unreadable files; messages name the byte offset when known.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

// Violated call contracts between modules (shape mismatches, labels out of
// range, incompatible records).
struct ContractError : Error {
  explicit ContractError(const std::string& msg) : Error("contract", msg) {}
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error("numeric", msg) {}
};

// Evaluation impossible (e.g. empty test set).
struct EvalError : Error {
  explicit EvalError(const std::string& msg) : Error("eval", msg) {}
};

}  // namespace crl
