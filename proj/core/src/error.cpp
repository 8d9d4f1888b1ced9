#include "dbench/error.hpp"

namespace dbench {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage:
      return 2;
    case ErrorKind::Io:
    case ErrorKind::Format:
    case ErrorKind::Capacity:
    case ErrorKind::Data:
      return 3;
    case ErrorKind::Provider:
      return 4;
  }
  return 1;
}

void throw_error(ErrorKind kind, const std::string& what) {
  switch (kind) {
    case ErrorKind::Usage:
      throw UsageError(what);
    case ErrorKind::Io:
      throw IoError(what);
    case ErrorKind::Format:
      throw FormatError(what);
    case ErrorKind::Capacity:
      throw CapacityError(what);
    case ErrorKind::Data:
      throw DataError(what);
    case ErrorKind::Provider:
      throw ProviderError(what);
  }
  throw Error(kind, what);
}

}  // namespace dbench
