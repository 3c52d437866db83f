#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cohkit {

// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A discourse or document has fewer sentences than an operation needs.
class TooShort : public Error {
 public:
  using Error::Error;
};

// No interior (non-opening, non-closing) sentence exists.
class NoInterior : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Scorer or generator failed, was unreachable, or broke its output contract.
class BackendError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  InsufficientData(std::size_t needed, std::size_t available, const std::string& what)
      : Error(what + " (needed " + std::to_string(needed) + ", have " + std::to_string(available) +
              ", short by " + std::to_string(needed > available ? needed - available : 0) + ")"),
        needed_(needed),
        available_(available) {}

  std::size_t needed() const noexcept { return needed_; }
  std::size_t available() const noexcept { return available_; }
  std::size_t shortfall() const noexcept { return needed_ > available_ ? needed_ - available_ : 0; }

 private:
  std::size_t needed_;
  std::size_t available_;
};

// A correlation coefficient is not defined for the given inputs.
class Undefined : public Error {
 public:
  using Error::Error;
};

}  // namespace cohkit
