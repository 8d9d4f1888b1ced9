#pragma once

#include <stdexcept>
#include <string>

namespace dbench {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
  Usage,     // bad arguments, violated preconditions, bad config (exit 2)
  Io,        // unreadable/unwritable files (exit 3)
  Format,    // malformed file contents (exit 3)
  Capacity,  // population too small for the requested sample (exit 3)
  Data,      // other data problems, e.g. incomplete curves (exit 3)
  Provider,  // embedding provider failures (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::Format, what) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error(ErrorKind::Capacity, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what) : Error(ErrorKind::Provider, what) {}
};

int exit_code(ErrorKind kind) noexcept;

/// Throws the concrete subclass for `kind`, so callers can add context
/// without changing how the error is caught.
[[noreturn]] void throw_error(ErrorKind kind, const std::string& what);

}  // namespace dbench
