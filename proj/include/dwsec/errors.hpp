#pragma once

#include <stdexcept>
#include <string>

namespace dwsec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

/// Raised when an iteration whose fixed point only exists for stable
/// dynamics is handed an operator with spectral radius >= 1.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class PresetIntegrityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedCovarianceError : public Error {
 public:
  using Error::Error;
};

class ChannelExhaustedError : public Error {
 public:
  using Error::Error;
};

class SequencingError : public Error {
 public:
  using Error::Error;
};

class ColdStartError : public Error {
 public:
  using Error::Error;
};

class WarmupError : public Error {
 public:
  using Error::Error;
};

/// Configuration document problem; `key()` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace dwsec
