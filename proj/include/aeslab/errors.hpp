#pragma once

#include <stdexcept>
#include <string>

namespace aeslab {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition of an API call (bad index, unknown set, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Operand shapes incompatible for a tensor op.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Malformed input file (header, magic, encoding).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Raw and segmented token streams disagree.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Cross-validation fold whose training part lacks an essay set it validates on.
class StratificationError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace aeslab
