#pragma once

#include <stdexcept>
#include <string>

namespace editfit {

// Base for every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Unsupported file format, bit depth, colour type, or malformed model file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Tape misuse (backward without forward, double backward) or optimizer key mismatch.
class StateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Invalid preset specification; the message names the offending step.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace editfit
