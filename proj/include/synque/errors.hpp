#pragma once

#include <stdexcept>
#include <string>

namespace synque {

// Malformed input files, duplicate ids, bad config values. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

// Remote endpoint failures after retries. Maps to CLI exit code 3.
class EndpointError : public std::runtime_error {
 public:
  EndpointError(const std::string& what, int status = 0)
      : std::runtime_error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// A correlation over constant (or too short) vectors.
class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace synque
