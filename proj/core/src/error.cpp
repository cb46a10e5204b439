#include "evoroc/error.hpp"

namespace evoroc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kAucUndefined: return "AUC undefined";
    case ErrorCode::kStaleRecord: return "stale activation record";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kChecksumMismatch: return "checksum mismatch";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown error";
}

}  // namespace evoroc
