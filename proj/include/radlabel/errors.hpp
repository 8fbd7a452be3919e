#pragma once

#include <stdexcept>
#include <string>

namespace radlabel {

// Base error for everything the harness raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent run configuration; raised before any IO happens.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset files, label violations, bad split inputs.
class DataError : public Error {
 public:
  using Error::Error;
};

// Model text from which no flat key/value object could be recovered.
class ExtractError : public Error {
 public:
  using Error::Error;
};

// Endpoint misconfiguration (unreachable host is reported per answer, not thrown).
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace radlabel
