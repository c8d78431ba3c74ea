#pragma once

#include <stdexcept>
#include <string>

namespace synthq {

// Base class for every failure the toolkit reports. The CLI maps these to
// exit code 1; UsageError maps to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Remote call failure. status() is the HTTP status, or 0 when no response
/// was received (connection refused, timeout).
class HttpError : public Error {
 public:
  HttpError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const { return status_; }
  bool retryable() const { return status_ == 0 || status_ == 429 || status_ >= 500; }

 private:
  int status_;
};

}  // namespace synthq
