#include "s2l/error.hpp"

namespace s2l {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kStructural: return "structural";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kMapping: return "mapping";
    case ErrorKind::kLookupMiss: return "lookup-miss";
    case ErrorKind::kBackend: return "backend";
    case ErrorKind::kEmptyResponse: return "empty-response";
    case ErrorKind::kCacheMiss: return "cache-miss";
    case ErrorKind::kExtractionMiss: return "extraction-miss";
    case ErrorKind::kLoad: return "load";
    case ErrorKind::kDegenerateInput: return "degenerate-input";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

}  // namespace s2l
