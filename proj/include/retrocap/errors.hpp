#pragma once

#include <stdexcept>
#include <string>

namespace retrocap {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto process exit codes via exit_code().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexBuildError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable input files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid knobs (negative sigma, k = 0, empty frame list, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

class FilterError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class VocabError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class NumericsError : public Error {
 public:
  NumericsError(const std::string& what, long batch_id)
      : Error(what), batch_id_(batch_id) {}
  int exit_code() const noexcept override { return 3; }
  long batch_id() const noexcept { return batch_id_; }

 private:
  long batch_id_;
};

}  // namespace retrocap
