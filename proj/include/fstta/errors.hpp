#pragma once

#include <stdexcept>
#include <string>

namespace fstta {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid data fed into an operation (non-finite values, dimension mismatch,
// malformed files).
class ValidityError : public Error {
public:
  explicit ValidityError(const std::string& msg) : Error(msg) {}
};

// A numerical procedure failed to converge or produced an inconsistent
// result. Never swallowed silently.
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// Bad configuration (unknown keys, out-of-range values, missing files).
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Training did not reach its required quality floor within budget.
class TrainingError : public Error {
public:
  explicit TrainingError(const std::string& msg) : Error(msg) {}
};

// A gradient window holds fewer samples than the operation needs.
class InsufficientWindowError : public Error {
public:
  explicit InsufficientWindowError(const std::string& msg) : Error(msg) {}
};

}  // namespace fstta
