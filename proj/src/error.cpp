#include "wdiff/error.hpp"

namespace wdiff {

std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedWavelet: return "UnsupportedWavelet";
    case ErrorCode::TooManyLevels: return "TooManyLevels";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::GraphStateError: return "GraphStateError";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::BinMismatch: return "BinMismatch";
    case ErrorCode::DegenerateFeature: return "DegenerateFeature";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::WindowTooLong: return "WindowTooLong";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::CheckpointError: return "CheckpointError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace wdiff
