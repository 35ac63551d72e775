#pragma once

#include <stdexcept>
#include <string>

namespace soc {

// Error categories mirror the failure modes of loading and backend I/O.
// Validation findings are returned as data, not thrown.

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct FileMissingError : Error {
  explicit FileMissingError(const std::string& path)
      : Error("file missing: " + path) {}
};

struct MalformedDocumentError : Error {
  using Error::Error;
};

struct DanglingLabelError : Error {
  using Error::Error;
};

struct ExemplarError : Error {
  using Error::Error;
};

struct AggregationError : Error {
  using Error::Error;
};

struct MetricError : Error {
  using Error::Error;
};

struct BackendError : Error {
  using Error::Error;
};

struct AuthFailureError : BackendError {
  using BackendError::BackendError;
};

struct RateLimitedError : BackendError {
  using BackendError::BackendError;
};

struct TransportError : BackendError {
  using BackendError::BackendError;
};

struct OversizedPayloadError : BackendError {
  using BackendError::BackendError;
};

struct UnknownFrameError : BackendError {
  using BackendError::BackendError;
};

struct RunnerError : Error {
  using Error::Error;
};

}  // namespace soc
