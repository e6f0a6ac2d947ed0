#pragma once

#include <stdexcept>
#include <string>

namespace pardec {

// Each kind maps to one CLI exit code (see tools/pardec_cli.cpp).
enum class ErrorKind {
  Config,
  Capacity,
  Io,
  Codec,
  NonConvergence,
  CycleDetected,
  OracleMismatch,
  Comparison,
  Range,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error(ErrorKind::Capacity, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace pardec
