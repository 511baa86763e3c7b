#pragma once

#include <stdexcept>
#include <string>

namespace sdgd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad widths, unknown config keys, d < 2, ...
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Vector / matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Dimension index outside {0, ..., d_in - 1}.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Point outside the domain where a function is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (missing atoms, layout mismatch).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument value (empty index set, k > N without replacement).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Operation not defined for this problem kind or network form.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Enumeration would exceed the configured combination guard.
class GuardError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure or malformed file contents.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for its input (e.g. relative error against zero).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdgd
