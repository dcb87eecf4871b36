#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace refscan {

enum class ErrorCode {
  kUsage,
  kMissingFile,
  kParseError,
  kDuplicateProject,
  kNotARepository,
  kBranchNotFound,
  kGitInvocationFailure,
  kEmptyTraining,
  kDegenerateInput,
  kSchemaMismatch,
  kSingleClassInput,
  kWidthMismatch,
  kEmptyDataset,
  kLengthMismatch,
  kDegenerateInstance,
  kEmptyInput,
  kIoFailure,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage: return "Usage";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateProject: return "DuplicateProject";
    case ErrorCode::kNotARepository: return "NotARepository";
    case ErrorCode::kBranchNotFound: return "BranchNotFound";
    case ErrorCode::kGitInvocationFailure: return "GitInvocationFailure";
    case ErrorCode::kEmptyTraining: return "EmptyTraining";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kSingleClassInput: return "SingleClassInput";
    case ErrorCode::kWidthMismatch: return "WidthMismatch";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kDegenerateInstance: return "DegenerateInstance";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kIoFailure: return "IoFailure";
  }
  return "Unknown";
}

/// Error raised by every refscan operation. The code identifies the failure
/// class; the message carries the detail (line number, project id, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) +
                           (detail.empty() ? "" : ": " + detail)),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace refscan
