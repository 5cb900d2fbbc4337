#pragma once

#include <stdexcept>
#include <string>

namespace sttc {

/// Failure categories. Values double as process exit codes for the CLI.
enum class ErrorCode : int {
  config = 2,    // bad configuration or usage
  data = 3,      // unreadable, malformed, or degenerate input data
  stream = 4,    // streaming-order or queue invariant violated
  property = 5,  // a verified numerical property failed to hold
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }
  int exit_code() const { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
};

struct InvalidConfig : Error {
  explicit InvalidConfig(const std::string& w) : Error(ErrorCode::config, w) {}
};

/// Signal length too short for a spectral round trip.
struct InvalidHorizon : Error {
  explicit InvalidHorizon(const std::string& w) : Error(ErrorCode::config, w) {}
};

struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& w) : Error(ErrorCode::data, w) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error(ErrorCode::data, w) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorCode::data, w) {}
};

struct NonFinite : Error {
  explicit NonFinite(const std::string& w) : Error(ErrorCode::data, w) {}
};

/// Zero-variance series that cannot be normalized.
struct DegenerateSeries : Error {
  explicit DegenerateSeries(const std::string& w) : Error(ErrorCode::data, w) {}
};

struct SingularSystem : Error {
  explicit SingularSystem(const std::string& w) : Error(ErrorCode::data, w) {}
};

struct EmptyMetric : Error {
  explicit EmptyMetric(const std::string& w) : Error(ErrorCode::data, w) {}
};

/// Out-of-order or inconsistent stream input.
struct SequenceError : Error {
  explicit SequenceError(const std::string& w) : Error(ErrorCode::stream, w) {}
};

struct StreamAssert : Error {
  explicit StreamAssert(const std::string& w) : Error(ErrorCode::stream, w) {}
};

struct PropertyViolation : Error {
  explicit PropertyViolation(const std::string& w)
      : Error(ErrorCode::property, w) {}
};

}  // namespace sttc
