#pragma once

#include <stdexcept>
#include <string>

namespace rcrf {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid invocation: bad flags, precondition violated by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Parameters that cannot work together (e.g. Gray splitting without censor times).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Input data that does not match the expected schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Malformed cell or record in an input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Data that parsed but violates a domain invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Mathematical precondition violated (empty average, reversed interval...).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace rcrf
