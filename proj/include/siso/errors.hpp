#pragma once

#include <stdexcept>
#include <string>

namespace siso {

// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class NumericFailure : public Error {
 public:
  using Error::Error;
};

// Malformed plant data, e.g. rk[G' H'] < p.
class ModelInvalid : public Error {
 public:
  using Error::Error;
};

// A design is provably impossible for the given data (rank condition fails,
// class-0 certificate with gamma < 0, ...).
class DesignImpossible : public Error {
 public:
  using Error::Error;
};

// Every candidate program of a search was infeasible or failed.
class SynthesisInfeasible : public Error {
 public:
  using Error::Error;
};

class AbstractionFailure : public Error {
 public:
  using Error::Error;
};

class InputValidation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace siso
