#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2l {

enum class ErrorKind {
  kArgument,
  kStructural,
  kParse,
  kMapping,
  kLookupMiss,
  kBackend,
  kEmptyResponse,
  kCacheMiss,
  kExtractionMiss,
  kLoad,
  kDegenerateInput,
  kConfig,
  kIo,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library. The kind tells callers which
// failure class occurred; optional fields carry the details some kinds need.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const { return kind_; }

  // Parse errors: byte offset into the input.
  std::optional<std::size_t> position;
  // Load errors / ragged tables: record or row index.
  std::optional<std::size_t> index;
  // Backend errors: HTTP status, when the failure had one.
  std::optional<int> http_status;
  // Lookup misses: the normalized key that was searched.
  std::optional<std::string> key;
  // Structural errors about spans: offending span ids or names.
  std::vector<std::string> offenders;

 private:
  ErrorKind kind_;
};

}  // namespace s2l
