#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace intent {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on numeric input was violated (empty input, non-finite
/// values, out-of-range sizes, single-class labels, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A stored run is malformed. `item_id()` names the offending record when the
/// failure can be attributed to one.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::string item_id = {})
      : Error(item_id.empty() ? what : what + " (item " + item_id + ")"),
        item_id_(std::move(item_id)) {}

  const std::string& item_id() const noexcept { return item_id_; }

 private:
  std::string item_id_;
};

class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

class SchemaVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class CountMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Two run directories claim the same (model, benchmark, regime) cell.
class DuplicateCellError : public Error {
 public:
  using Error::Error;
};

/// AUROC requested on scores whose labels hold a single class.
class UndefinedAurocError : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace intent
