#pragma once

#include <stdexcept>
#include <string>

namespace qrel {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  io,
  parse,
  bad_magic,
  truncated,
  duplicate,
  not_found,
  corrupt,
  numeric,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::duplicate: return "duplicate";
    case ErrorCode::not_found: return "not found";
    case ErrorCode::corrupt: return "corrupt";
    case ErrorCode::numeric: return "numeric failure";
  }
  return "unknown";
}

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace qrel
