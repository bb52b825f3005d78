#ifndef SPECTEX_ERRORS_HPP_
#define SPECTEX_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace spectex {

// All library failures derive from Error so callers can catch one type and
// still map the concrete class onto exit codes / HTTP statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition (size mismatch, bad argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

}  // namespace spectex

#endif  // SPECTEX_ERRORS_HPP_
