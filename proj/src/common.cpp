#include "pdediff/common.hpp"

namespace pdediff {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidProportion: return "InvalidProportion";
    case ErrorCode::DataTooShort: return "DataTooShort";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::InitTooShort: return "InitTooShort";
    case ErrorCode::RegimeMismatch: return "RegimeMismatch";
    case ErrorCode::NotStationary: return "NotStationary";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::EmptyTrain: return "EmptyTrain";
    case ErrorCode::EmptyObservations: return "EmptyObservations";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidGrid:
    case ErrorCode::InvalidProportion:
    case ErrorCode::RegimeMismatch:
      return 1;
    case ErrorCode::IoError:
      return 3;
    default:
      return 2;
  }
}

}  // namespace pdediff
