#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace balar {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (bad priors list, bad config file, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An elicited payload violated the label/shape contract (unknown label, ragged grid).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Two objects that must share a state space or choice set do not.
class MismatchError : public Error {
 public:
  using Error::Error;
};

/// Observation carries zero evidence mass under the current support.
class DegenerateObservation : public Error {
 public:
  using Error::Error;
};

/// Extending the state space would exceed the configured cap.
class StateCapExceeded : public Error {
 public:
  using Error::Error;
};

/// An elicitation call failed after exhausting its retries, or the transport failed.
class ElicitationError : public Error {
 public:
  ElicitationError(std::string call_kind, const std::string& message, std::string last_raw = {})
      : Error(message), call_kind_(std::move(call_kind)), last_raw_(std::move(last_raw)) {}

  const std::string& call_kind() const noexcept { return call_kind_; }
  const std::string& last_raw() const noexcept { return last_raw_; }

 private:
  std::string call_kind_;
  std::string last_raw_;
};

}  // namespace balar
