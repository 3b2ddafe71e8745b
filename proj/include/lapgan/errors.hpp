#pragma once

#include <stdexcept>
#include <string>

namespace lapgan {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidState : public Error {
 public:
  using Error::Error;
};

/// A loss or activation stopped being finite.
class NumericOverflow : public Error {
 public:
  using Error::Error;
};

/// Malformed bytes in an input file. `offset` is the byte position where
/// parsing failed.
class CorruptData : public Error {
 public:
  CorruptData(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace lapgan
