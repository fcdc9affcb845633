#pragma once

#include <stdexcept>
#include <string>

namespace stepadapt {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter or configuration violates its documented bounds.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// The noise family does not implement the requested query (e.g. a CDF).
class UnsupportedQuery : public Error {
 public:
  using Error::Error;
};

/// The iterate or step size stopped being finite.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class EmptySet : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration text. Carries line/key context in the message.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed configuration whose values fail validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace stepadapt
