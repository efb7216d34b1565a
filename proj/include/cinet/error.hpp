#pragma once

#include <stdexcept>
#include <string>

namespace cinet {

// Base class for every error raised by the library. The CLI maps these to
// exit status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameters or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Structurally valid call on unusable data (empty corpus, empty set, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Vector or matrix dimensions that do not match the model.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed or incompatible file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace cinet
