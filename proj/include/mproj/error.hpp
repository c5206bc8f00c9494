#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mproj {

// Input data is malformed or inconsistent (maps to CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A requested token is not in the vocabulary.
class UnknownToken : public DataError {
 public:
  explicit UnknownToken(const std::string& token)
      : DataError("unknown token: " + token), token_(token) {}

  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

// A direction could not be formed (zero vector, coincident means/medians).
class DegenerateDirection : public DataError {
 public:
  using DataError::DataError;
};

// Caller violated a documented precondition (maps to CLI exit code 1).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mproj
