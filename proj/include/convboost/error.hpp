#pragma once

#include <stdexcept>
#include <string>

namespace convboost {

// Base for every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or violated precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk data (binary formats, images, model files).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Malformed text input: XML annotations, manifests, proposal files.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Incompatible components, e.g. a model trained against a different filter bank.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace convboost
