#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace monolab {

// Base for every domain error raised by the library. The CLI maps
// subclasses of IoError to exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FileNotFound : public IoError {
 public:
  using IoError::IoError;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class DegenerateData : public Error {
 public:
  using Error::Error;
};

class NonPlanarTree : public Error {
 public:
  using Error::Error;
};

class EmptyTail : public Error {
 public:
  using Error::Error;
};

class InsufficientTail : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class NonSquareInput : public Error {
 public:
  using Error::Error;
};

class AttemptCapExceeded : public Error {
 public:
  AttemptCapExceeded(const std::string& what, std::uint64_t monotone_found,
                     std::uint64_t non_monotone_found, std::uint64_t attempts)
      : Error(what),
        monotone_found_(monotone_found),
        non_monotone_found_(non_monotone_found),
        attempts_(attempts) {}

  std::uint64_t monotone_found() const { return monotone_found_; }
  std::uint64_t non_monotone_found() const { return non_monotone_found_; }
  std::uint64_t attempts() const { return attempts_; }

 private:
  std::uint64_t monotone_found_;
  std::uint64_t non_monotone_found_;
  std::uint64_t attempts_;
};

}  // namespace monolab
