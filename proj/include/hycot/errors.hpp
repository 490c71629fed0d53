#pragma once

#include <stdexcept>
#include <string>

namespace hycot {

// Error hierarchy. The CLI maps each family onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or array extents that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters, empty datasets, band/latent mismatches.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Violated call precondition (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed file: bad magic, unsupported version, truncated payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Compressed file produced by a different checkpoint than the one supplied.
class ModelMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace hycot
