#pragma once

#include <stdexcept>
#include <string>

namespace osvos {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when input files are missing or unreadable.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Raised when file contents violate the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace osvos
